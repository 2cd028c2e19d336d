//! Model backend selection shared by every subcommand.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;
use sha2::{Digest, Sha256};

use layerdebias::fixtures::default_lexicon;
use layerdebias::model::{
    BridgeModel, EmbeddingDump, LayeredModel, ReplayModel, SyntheticConfig, SyntheticModel,
};

use crate::output::Provenance;

#[derive(Args, Debug, Serialize)]
pub struct ModelArgs {
    /// synthetic, bridge or replay.
    #[arg(long, default_value = "synthetic")]
    pub backend: String,
    /// `tcp://host:port` or `exec:<command>` of a bridge server.
    #[arg(long)]
    pub bridge_addr: Option<String>,
    #[arg(long, default_value_t = 12)]
    pub bridge_layers: usize,
    #[arg(long, default_value_t = 768)]
    pub bridge_width: usize,
    /// Embedding dump served by the replay backend.
    #[arg(long)]
    #[serde(skip)]
    pub dump: Option<PathBuf>,
    /// Root seed. Also seeds the synthetic model.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 6)]
    pub synthetic_layers: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    /// Planting strength of the synthetic gender direction.
    #[arg(long, default_value_t = 1.5)]
    pub beta: f64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,
}

impl ModelArgs {
    /// Builds the selected backend and records its inputs in `prov`.
    pub fn build(&self, prov: &mut Provenance) -> Result<Box<dyn LayeredModel>> {
        let model: Box<dyn LayeredModel> = match self.backend.as_str() {
            "synthetic" => {
                if self.bridge_addr.is_some() || self.dump.is_some() {
                    bail!("--bridge-addr and --dump need --backend bridge or replay");
                }
                let lex = default_lexicon();
                prov.inputs.push(("lexicon".into(), lex.hash()));
                let cfg = SyntheticConfig {
                    seed: self.seed,
                    layers: self.synthetic_layers,
                    width: self.width,
                    beta: self.beta,
                    ..SyntheticConfig::default()
                };
                Box::new(SyntheticModel::new(cfg, lex)?)
            }
            "bridge" => {
                if self.dump.is_some() {
                    bail!("--dump is only used by --backend replay");
                }
                let addr = self
                    .bridge_addr
                    .as_deref()
                    .context("--backend bridge needs --bridge-addr")?;
                Box::new(
                    BridgeModel::connect(addr, self.bridge_layers, self.bridge_width)
                        .with_context(|| format!("bridge at {addr} unreachable"))?,
                )
            }
            "replay" => {
                if self.bridge_addr.is_some() {
                    bail!("--bridge-addr is only used by --backend bridge");
                }
                let path = self
                    .dump
                    .as_ref()
                    .context("--backend replay needs --dump")?;
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read {}", path.display()))?;
                let dump = EmbeddingDump::parse(&text, &path.display().to_string())?;
                let hash = crate::output::sha256_hex(text.as_bytes());
                prov.inputs.push(("dump".into(), hash.clone()));
                Box::new(ReplayModel::new(&hash[..12], dump)?)
            }
            other => bail!("unknown backend {other:?} (synthetic, bridge, replay)"),
        };
        prov.model = model.id();
        Ok(model)
    }
}

/// Seed for one training run, derived from the root seed and a label so
/// that runs do not share random streams.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}
