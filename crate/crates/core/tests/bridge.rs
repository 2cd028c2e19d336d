use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread;

use layerdebias::fixtures::{default_lexicon, default_pairs, default_template};
use layerdebias::linalg::dot;
use layerdebias::model::{
    BridgeModel, BridgeRequest, BridgeResponse, EmbeddingDump, LayerVectors, LayeredModel,
    ReplayModel, SyntheticConfig, SyntheticModel, TokenSequence,
};
use layerdebias::subspace::{
    build_definition_pair, extract_independent, extract_iterative, ExtractOptions,
};
use serde_json::{json, Value};

const PROTOCOL: &str = include_str!("fixtures/bridge_protocol.jsonl");

/// Rounds to nine significant digits, the bridge's wire precision.
fn wire(x: f64) -> f64 {
    format!("{x:.8e}").parse().unwrap()
}

fn wire_matrix(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    m.iter()
        .map(|r| r.iter().map(|x| wire(*x)).collect())
        .collect()
}

fn answer(model: &SyntheticModel, req: BridgeRequest) -> BridgeResponse {
    let ok = |tokens, vectors: Option<Value>, layer| BridgeResponse {
        ok: true,
        tokens,
        vectors,
        layer,
        error: None,
    };
    let result = (|| -> layerdebias::Result<BridgeResponse> {
        match req.op.as_str() {
            "tokenize" => {
                let t = model.tokenize(req.text.as_deref().unwrap_or(""))?;
                Ok(ok(Some(t.tokens().to_vec()), None, None))
            }
            "embed0" => {
                let t = TokenSequence::new(req.tokens.unwrap_or_default())?;
                let v = model.embed0(&t)?;
                Ok(ok(None, Some(json!(wire_matrix(&v.vectors))), Some(0)))
            }
            "apply_layer" => {
                let layer = req.layer.unwrap_or(0);
                let input = LayerVectors {
                    layer: layer.saturating_sub(1),
                    vectors: req.vectors.unwrap_or_default(),
                };
                let v = model.apply_layer(layer, &input)?;
                Ok(ok(None, Some(json!(wire_matrix(&v.vectors))), Some(layer)))
            }
            "forward_all" => {
                let t = TokenSequence::new(req.tokens.unwrap_or_default())?;
                let all: Vec<_> = model
                    .forward_all(&t)?
                    .iter()
                    .map(|l| wire_matrix(&l.vectors))
                    .collect();
                Ok(ok(None, Some(json!(all)), None))
            }
            other => Err(layerdebias::Error::Bridge(format!("unknown op {other}"))),
        }
    })();
    result.unwrap_or_else(|e| BridgeResponse {
        ok: false,
        tokens: None,
        vectors: None,
        layer: None,
        error: Some(e.to_string()),
    })
}

/// Serves one connection with `model` and returns its address.
fn serve_synthetic(model: SyntheticModel) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut writer = stream.try_clone().unwrap();
        for line in BufReader::new(stream).lines() {
            let Ok(line) = line else { break };
            let resp = match serde_json::from_str::<BridgeRequest>(&line) {
                Ok(req) => answer(&model, req),
                Err(e) => BridgeResponse {
                    ok: false,
                    tokens: None,
                    vectors: None,
                    layer: None,
                    error: Some(format!("bad request: {e}")),
                },
            };
            let out = serde_json::to_string(&resp).unwrap();
            if writeln!(writer, "{out}").is_err() {
                break;
            }
        }
    });
    format!("tcp://{addr}")
}

fn synthetic() -> SyntheticModel {
    SyntheticModel::new(SyntheticConfig::default(), default_lexicon()).unwrap()
}

#[test]
fn tcp_bridge_matches_local_model() {
    let local = synthetic();
    let bridge = BridgeModel::connect(&serve_synthetic(synthetic()), 6, 64).unwrap();
    let tokens = bridge.tokenize("the queen met her aunt").unwrap();
    assert_eq!(tokens, local.tokenize("the queen met her aunt").unwrap());
    let remote = bridge.forward_all(&tokens).unwrap();
    let here = local.forward_all(&tokens).unwrap();
    assert_eq!(remote.len(), 7);
    let mut composed = bridge.embed0(&tokens).unwrap();
    for j in 0..=6 {
        if j > 0 {
            composed = bridge.apply_layer(j, &composed).unwrap();
        }
        for ((a, b), c) in remote[j]
            .vectors
            .iter()
            .zip(&here[j].vectors)
            .zip(&composed.vectors)
        {
            for ((x, y), z) in a.iter().zip(b).zip(c) {
                assert!((x - y).abs() <= 1e-4);
                assert!((x - z).abs() <= 1e-4);
            }
        }
    }
}

#[test]
fn iterative_extraction_over_tcp_matches_local() {
    let local = synthetic();
    let bridge = BridgeModel::connect(&serve_synthetic(synthetic()), 6, 64).unwrap();
    let pairs = default_pairs();
    let template = default_template();
    let run = |m: &dyn LayeredModel| {
        let dp = build_definition_pair(m, &pairs, &template).unwrap();
        extract_iterative(m, &dp, &pairs.hash(), ExtractOptions::default()).unwrap()
    };
    let (a, b) = (run(&local), run(&bridge));
    for j in 0..=6 {
        let c = dot(a.primary(j).unwrap().axis(), b.primary(j).unwrap().axis());
        assert!(c >= 1.0 - 1e-6, "layer {j}: {c}");
    }
}

#[test]
fn bridge_errors_surface() {
    let bridge = BridgeModel::connect(&serve_synthetic(synthetic()), 6, 64).unwrap();
    let t = TokenSequence::new(vec!["<s>".into(), "x".into(), "</s>".into()]).unwrap();
    assert!(bridge.embed0(&t).is_ok());
    let err = bridge.tokenize("   ").unwrap_err().to_string();
    assert!(err.contains("empty"), "{err}");
    let wide = BridgeModel::connect(&serve_synthetic(synthetic()), 6, 32).unwrap();
    let err = wide.embed0(&t).unwrap_err().to_string();
    assert!(err.contains("width"), "{err}");
    assert!(BridgeModel::connect("tcp://127.0.0.1:1", 6, 64).is_err());
}

/// Replays the recorded session: every request the client sends must equal
/// the recorded one, and the client must interpret the recorded responses.
#[test]
fn recorded_protocol_fixture() {
    let script: Vec<(char, Value)> = PROTOCOL
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            (
                l.chars().next().unwrap(),
                serde_json::from_str(&l[2..]).unwrap(),
            )
        })
        .collect();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut writer = stream.try_clone().unwrap();
        let mut lines = BufReader::new(stream).lines();
        for pair in script.chunks(2) {
            let [(q, request), (r, response)] = pair else {
                panic!("unpaired line")
            };
            assert_eq!((*q, *r), ('>', '<'));
            let got: Value = serde_json::from_str(&lines.next().unwrap().unwrap()).unwrap();
            assert_eq!(&got, request);
            writeln!(writer, "{response}").unwrap();
        }
    });

    let bridge = BridgeModel::connect(&format!("tcp://{addr}"), 2, 3).unwrap();
    let t = bridge.tokenize("she ran").unwrap();
    assert_eq!(t.content(), ["she", "ran"]);
    let e0 = bridge.embed0(&t).unwrap();
    assert_eq!(e0.vectors[1], vec![1.03125, 0.0625, -0.75]);
    let e1 = bridge.apply_layer(1, &e0).unwrap();
    assert_eq!(e1.vectors[0][0], 0.234567891);
    let all = bridge.forward_all(&t).unwrap();
    assert_eq!(all.len(), 3);
    assert_eq!(all[1].vectors, e1.vectors);
    let err = bridge.apply_layer(2, &e1).unwrap_err().to_string();
    assert!(err.contains("answered layer 1"), "{err}");
    let unknown = TokenSequence::new(vec!["[CLS]".into(), "zzxq".into(), "[SEP]".into()]).unwrap();
    let err = bridge.embed0(&unknown).unwrap_err().to_string();
    assert!(err.contains("unknown token zzxq"), "{err}");
    drop(bridge);
    server.join().unwrap();
}

#[test]
fn replayed_dump_gives_live_independent_directions() {
    let live = synthetic();
    let pairs = default_pairs();
    let template = default_template();
    let dp = build_definition_pair(&live, &pairs, &template).unwrap();
    let mut dump = EmbeddingDump::new(64, 7);
    let words = pairs
        .active()
        .flat_map(|(f, m)| [f.to_string(), m.to_string()]);
    let texts: Vec<String> = [dp.female_sentence.clone(), dp.male_sentence.clone()]
        .into_iter()
        .chain(words)
        .collect();
    for text in &texts {
        let t = live.tokenize(text).unwrap();
        let layers = live.forward_all(&t).unwrap();
        dump.push(text, t, layers).unwrap();
    }
    let dump = EmbeddingDump::parse(&dump.to_text(), "mem").unwrap();
    let replay = ReplayModel::new("fixture", dump).unwrap();
    let opts = ExtractOptions::default();
    let a = extract_independent(&live, &dp, 2, &pairs.hash(), opts).unwrap();
    let rdp = build_definition_pair(&replay, &pairs, &template).unwrap();
    let b = extract_independent(&replay, &rdp, 2, &pairs.hash(), opts).unwrap();
    assert_eq!(a.layers, b.layers);
    assert!(extract_iterative(&replay, &rdp, &pairs.hash(), opts).is_err());
}
