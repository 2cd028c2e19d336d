//! Client for the remote transformer bridge.
//!
//! Line-delimited JSON over a byte stream: one request object per line, one
//! response per line, in request order. The same message types are used by
//! the bridge process, so they are public.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{check_layer_input, LayerVectors, LayeredModel, TokenSequence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeRequest {
    pub op: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub layer: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tokens: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub vectors: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub text: Option<String>,
}

impl BridgeRequest {
    fn op(op: &str) -> Self {
        BridgeRequest {
            op: op.to_string(),
            layer: None,
            tokens: None,
            vectors: None,
            text: None,
        }
    }

    pub fn tokenize(text: &str) -> Self {
        BridgeRequest {
            text: Some(text.to_string()),
            ..Self::op("tokenize")
        }
    }

    pub fn embed0(tokens: &TokenSequence) -> Self {
        BridgeRequest {
            tokens: Some(tokens.tokens().to_vec()),
            ..Self::op("embed0")
        }
    }

    pub fn apply_layer(layer: usize, vectors: &[Vec<f64>]) -> Self {
        BridgeRequest {
            layer: Some(layer),
            vectors: Some(vectors.to_vec()),
            ..Self::op("apply_layer")
        }
    }

    pub fn forward_all(tokens: &TokenSequence) -> Self {
        BridgeRequest {
            tokens: Some(tokens.tokens().to_vec()),
            ..Self::op("forward_all")
        }
    }
}

/// A response line. `vectors` is a token-by-width matrix for `embed0` and
/// `apply_layer`, and a layer-by-token-by-width array for `forward_all`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeResponse {
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tokens: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub vectors: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub layer: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Request/response over any buffered reader and writer pair.
pub struct LineTransport<R, W> {
    reader: R,
    writer: W,
}

impl<R: BufRead, W: Write> LineTransport<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        LineTransport { reader, writer }
    }

    fn roundtrip(&mut self, line: &str) -> Result<String> {
        let wrap = |e: std::io::Error| Error::Bridge(format!("transport: {e}"));
        self.writer.write_all(line.as_bytes()).map_err(wrap)?;
        self.writer.write_all(b"\n").map_err(wrap)?;
        self.writer.flush().map_err(wrap)?;
        let mut resp = String::new();
        let n = self.reader.read_line(&mut resp).map_err(wrap)?;
        if n == 0 {
            return Err(Error::Bridge("connection closed by bridge".into()));
        }
        Ok(resp)
    }
}

trait Roundtrip: Send {
    fn roundtrip(&mut self, line: &str) -> Result<String>;
}

impl<R: BufRead + Send, W: Write + Send> Roundtrip for LineTransport<R, W> {
    fn roundtrip(&mut self, line: &str) -> Result<String> {
        LineTransport::roundtrip(self, line)
    }
}

struct ChildTransport {
    child: Child,
    inner: LineTransport<BufReader<ChildStdout>, ChildStdin>,
}

impl Roundtrip for ChildTransport {
    fn roundtrip(&mut self, line: &str) -> Result<String> {
        self.inner.roundtrip(line)
    }
}

impl Drop for ChildTransport {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Layered model served by a remote process.
pub struct BridgeModel {
    address: String,
    layers: usize,
    width: usize,
    transport: Mutex<Box<dyn Roundtrip>>,
}

impl BridgeModel {
    /// Connects to `tcp://host:port` (or bare `host:port`), or spawns
    /// `exec:<command line>` and talks over its standard streams.
    pub fn connect(address: &str, layers: usize, width: usize) -> Result<Self> {
        let transport: Box<dyn Roundtrip> = if let Some(cmd) = address.strip_prefix("exec:") {
            let mut parts = cmd.split_whitespace();
            let program = parts
                .next()
                .ok_or_else(|| Error::Bridge("empty bridge command".into()))?;
            let mut child = Command::new(program)
                .args(parts)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .spawn()
                .map_err(|e| Error::Bridge(format!("cannot start {program:?}: {e}")))?;
            let stdin = child.stdin.take().expect("piped stdin");
            let stdout = child.stdout.take().expect("piped stdout");
            Box::new(ChildTransport {
                child,
                inner: LineTransport::new(BufReader::new(stdout), stdin),
            })
        } else {
            let addr = address.strip_prefix("tcp://").unwrap_or(address);
            let stream = TcpStream::connect(addr)
                .map_err(|e| Error::Bridge(format!("cannot reach {addr}: {e}")))?;
            let reader = BufReader::new(
                stream
                    .try_clone()
                    .map_err(|e| Error::Bridge(format!("socket: {e}")))?,
            );
            Box::new(LineTransport::new(reader, stream))
        };
        Ok(BridgeModel {
            address: address.to_string(),
            layers,
            width,
            transport: Mutex::new(transport),
        })
    }

    /// Uses an already established stream pair.
    pub fn with_transport<R, W>(
        address: &str,
        layers: usize,
        width: usize,
        transport: LineTransport<R, W>,
    ) -> Self
    where
        R: BufRead + Send + 'static,
        W: Write + Send + 'static,
    {
        BridgeModel {
            address: address.to_string(),
            layers,
            width,
            transport: Mutex::new(Box::new(transport)),
        }
    }

    fn call(&self, req: &BridgeRequest) -> Result<BridgeResponse> {
        let line = serde_json::to_string(req)?;
        let raw = self
            .transport
            .lock()
            .map_err(|_| Error::Bridge("transport lock poisoned".into()))?
            .roundtrip(&line)?;
        let resp: BridgeResponse = serde_json::from_str(raw.trim_end())
            .map_err(|e| Error::Bridge(format!("malformed response: {e}")))?;
        if !resp.ok {
            return Err(Error::Bridge(
                resp.error
                    .unwrap_or_else(|| "unspecified bridge error".into()),
            ));
        }
        Ok(resp)
    }

    fn matrix(&self, value: Option<Value>, tokens: usize) -> Result<Vec<Vec<f64>>> {
        let value = value.ok_or_else(|| Error::Bridge("response lacks vectors".into()))?;
        let m: Vec<Vec<f64>> = serde_json::from_value(value)
            .map_err(|e| Error::Bridge(format!("vectors are not a matrix: {e}")))?;
        self.check_matrix(&m, tokens)?;
        Ok(m)
    }

    fn check_matrix(&self, m: &[Vec<f64>], tokens: usize) -> Result<()> {
        if m.len() != tokens {
            return Err(Error::Bridge(format!(
                "expected {tokens} vectors, bridge returned {}",
                m.len()
            )));
        }
        if let Some(bad) = m.iter().find(|v| v.len() != self.width) {
            return Err(Error::Bridge(format!(
                "expected width {}, bridge returned {}",
                self.width,
                bad.len()
            )));
        }
        Ok(())
    }
}

impl LayeredModel for BridgeModel {
    fn id(&self) -> String {
        format!("bridge({})", self.address)
    }

    fn layer_count(&self) -> usize {
        self.layers
    }

    fn width(&self) -> usize {
        self.width
    }

    fn tokenize(&self, text: &str) -> Result<TokenSequence> {
        if text.trim().is_empty() {
            return Err(Error::InvalidInput("cannot tokenize empty text".into()));
        }
        let resp = self.call(&BridgeRequest::tokenize(text))?;
        TokenSequence::new(
            resp.tokens
                .ok_or_else(|| Error::Bridge("tokenize response lacks tokens".into()))?,
        )
    }

    fn embed0(&self, tokens: &TokenSequence) -> Result<LayerVectors> {
        let resp = self.call(&BridgeRequest::embed0(tokens))?;
        Ok(LayerVectors {
            layer: 0,
            vectors: self.matrix(resp.vectors, tokens.len())?,
        })
    }

    fn apply_layer(&self, layer: usize, input: &LayerVectors) -> Result<LayerVectors> {
        check_layer_input(self, layer, input)?;
        let resp = self.call(&BridgeRequest::apply_layer(layer, &input.vectors))?;
        if let Some(l) = resp.layer {
            if l != layer {
                return Err(Error::Bridge(format!(
                    "asked for layer {layer}, bridge answered layer {l}"
                )));
            }
        }
        Ok(LayerVectors {
            layer,
            vectors: self.matrix(resp.vectors, input.vectors.len())?,
        })
    }

    fn forward_all(&self, tokens: &TokenSequence) -> Result<Vec<LayerVectors>> {
        let resp = self.call(&BridgeRequest::forward_all(tokens))?;
        let value = resp
            .vectors
            .ok_or_else(|| Error::Bridge("forward_all response lacks vectors".into()))?;
        let all: Vec<Vec<Vec<f64>>> = serde_json::from_value(value)
            .map_err(|e| Error::Bridge(format!("forward_all vectors malformed: {e}")))?;
        if all.len() != self.layers + 1 {
            return Err(Error::Bridge(format!(
                "expected {} layers, bridge returned {}",
                self.layers + 1,
                all.len()
            )));
        }
        all.into_iter()
            .enumerate()
            .map(|(layer, vectors)| {
                self.check_matrix(&vectors, tokens.len())?;
                Ok(LayerVectors { layer, vectors })
            })
            .collect()
    }
}
