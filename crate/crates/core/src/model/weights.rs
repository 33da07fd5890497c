use std::collections::HashMap;
use std::sync::Arc;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{checkpoint, Tape, Tensor, Var};

use super::config::ModelConfig;

/// Per-query heads: name and output width.
pub(crate) const QUERY_HEADS: [(&str, usize); 5] = [
    ("type", 4),
    ("prismatic_range", 2),
    ("revolute_range", 2),
    ("prismatic_dir", 3),
    ("revolute_dir", 3),
];

pub(crate) const STAGES: [&str; 3] = ["query_self", "query_to_point", "point_to_query"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Init {
    /// Uniform in +-1/sqrt(fan_in) with fan_in = first dimension.
    FanIn,
    Zeros,
    Ones,
    /// Normal with standard deviation 0.02.
    Normal,
}

fn linear(out: &mut Vec<(String, Vec<usize>, Init)>, name: &str, fan_in: usize, fan_out: usize) {
    out.push((format!("{name}.w"), vec![fan_in, fan_out], Init::FanIn));
    out.push((format!("{name}.b"), vec![fan_out], Init::Zeros));
}

fn mlp2(out: &mut Vec<(String, Vec<usize>, Init)>, name: &str, i: usize, h: usize, o: usize) {
    linear(out, &format!("{name}.0"), i, h);
    linear(out, &format!("{name}.1"), h, o);
}

fn layer_norm(out: &mut Vec<(String, Vec<usize>, Init)>, name: &str, d: usize) {
    out.push((format!("{name}.g"), vec![d], Init::Ones));
    out.push((format!("{name}.b"), vec![d], Init::Zeros));
}

fn layout(c: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let d = c.dim;
    let mut v = Vec::new();
    mlp2(&mut v, "embed.position", 3, c.embed_hidden, d);
    mlp2(&mut v, "embed.normal", 3, c.embed_hidden, d);
    if c.feature_dim > 0 {
        mlp2(&mut v, "embed.feature", c.feature_dim, c.embed_hidden, d);
    }
    v.push(("queries".to_string(), vec![c.max_parts, d], Init::Normal));
    for b in 0..c.blocks {
        for s in STAGES {
            let p = format!("block{b}.{s}");
            layer_norm(&mut v, &format!("{p}.ln_q"), d);
            if s != "query_self" {
                layer_norm(&mut v, &format!("{p}.ln_kv"), d);
            }
            for proj in ["q", "k", "v", "o"] {
                linear(&mut v, &format!("{p}.attn.{proj}"), d, d);
            }
            layer_norm(&mut v, &format!("{p}.ln_mlp"), d);
            mlp2(&mut v, &format!("{p}.mlp"), d, c.mlp_hidden, d);
        }
    }
    layer_norm(&mut v, "final.ln_point", d);
    layer_norm(&mut v, "final.ln_query", d);
    let h = c.head_hidden;
    // pairwise heads: first layer split into the two operands of the concatenation
    for name in ["seg", "kin"] {
        v.push((format!("head.{name}.wa"), vec![d, h], Init::FanIn));
        v.push((format!("head.{name}.wb"), vec![d, h], Init::FanIn));
        v.push((format!("head.{name}.b0"), vec![h], Init::Zeros));
        v.push((format!("head.{name}.w1"), vec![h, 1], Init::FanIn));
        v.push((format!("head.{name}.b1"), vec![1], Init::Zeros));
    }
    v.push(("head.axis_point.wa".to_string(), vec![d, h], Init::FanIn));
    v.push(("head.axis_point.wb".to_string(), vec![d, h], Init::FanIn));
    v.push(("head.axis_point.b0".to_string(), vec![h], Init::Zeros));
    linear(&mut v, "head.axis_point.1", h, 3);
    for (name, o) in QUERY_HEADS {
        mlp2(&mut v, &format!("head.{name}"), d, h, o);
    }
    v
}

/// Parameter count of a fully connected layer with bias.
pub fn linear_params(fan_in: usize, fan_out: usize) -> usize {
    fan_in * fan_out + fan_out
}

/// Number of scalar parameters implied by `config`.
pub fn count_params(config: &ModelConfig) -> usize {
    layout(config).iter().map(|(_, s, _)| s.iter().product::<usize>()).sum()
}

/// Named parameter tensors for one model configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights {
    pub config: ModelConfig,
    tensors: Vec<(String, Tensor)>,
    index: Arc<HashMap<String, usize>>,
}

impl ModelWeights {
    /// Seeded initialization: fan-in uniform for matrices, N(0, 0.02) for queries,
    /// zeros for biases and ones for layer-norm gains.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = layout(config)
            .into_iter()
            .map(|(name, shape, init)| {
                let t = match init {
                    Init::FanIn => Tensor::uniform(&shape, 1.0 / (shape[0] as f64).sqrt(), &mut rng),
                    Init::Zeros => Tensor::zeros(&shape),
                    Init::Ones => Tensor::filled(&shape, 1.0),
                    Init::Normal => Tensor::randn(&shape, 0.02, &mut rng),
                };
                (name, t)
            })
            .collect();
        Ok(Self::from_tensors(config.clone(), tensors))
    }

    fn from_tensors(config: ModelConfig, tensors: Vec<(String, Tensor)>) -> Self {
        let index = Arc::new(tensors.iter().enumerate().map(|(i, (n, _))| (n.clone(), i)).collect());
        ModelWeights { config, tensors, index }
    }

    /// Builds weights from named tensors, checking names and shapes against `config`.
    pub fn from_named(config: ModelConfig, named: Vec<(String, Tensor)>) -> Result<Self> {
        config.validate()?;
        let mut by_name: HashMap<String, Tensor> = named.into_iter().collect();
        let mut tensors = Vec::new();
        for (name, shape, _) in layout(&config) {
            let t = by_name
                .remove(&name)
                .ok_or_else(|| Error::invalid(format!("checkpoint lacks tensor {name}")))?;
            if t.shape() != shape.as_slice() {
                return Err(Error::Shape {
                    op: "load weights",
                    lhs: shape,
                    rhs: t.shape().to_vec(),
                });
            }
            if !t.is_finite() {
                return Err(Error::Numerical(format!("tensor {name} holds non-finite values")));
            }
            tensors.push((name, t));
        }
        if let Some(extra) = by_name.keys().next() {
            return Err(Error::invalid(format!("checkpoint has unexpected tensor {extra}")));
        }
        Ok(Self::from_tensors(config, tensors))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|(n, _)| n.as_str())
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.tensors.iter().map(|(_, t)| t)
    }

    pub fn named(&self) -> &[(String, Tensor)] {
        &self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.tensors[i].1)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index.get(name).map(|&i| &mut self.tensors[i].1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn param_count(&self) -> usize {
        self.tensors().map(Tensor::numel).sum()
    }

    /// Mutable access to all tensors in a fixed order (for the optimizer).
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.tensors.iter_mut().map(|(_, t)| t).collect()
    }

    pub fn into_tensors(self) -> Vec<Tensor> {
        self.tensors.into_iter().map(|(_, t)| t).collect()
    }

    /// Replaces all tensors, keeping names; shapes must agree.
    pub fn set_tensors(&mut self, values: Vec<Tensor>) -> Result<()> {
        if values.len() != self.tensors.len() {
            return Err(Error::invalid("tensor count mismatch"));
        }
        for ((_, old), new) in self.tensors.iter().zip(&values) {
            if old.shape() != new.shape() {
                return Err(Error::Shape {
                    op: "set_tensors",
                    lhs: old.shape().to_vec(),
                    rhs: new.shape().to_vec(),
                });
            }
        }
        for ((_, old), new) in self.tensors.iter_mut().zip(values) {
            *old = new;
        }
        Ok(())
    }

    /// Registers every tensor as a leaf on `tape`.
    pub fn on_tape<'t>(&self, tape: &'t Tape) -> Params<'t> {
        Params {
            config: self.config.clone(),
            index: Arc::clone(&self.index),
            vars: self.tensors.iter().map(|(_, t)| tape.leaf(t.clone())).collect(),
        }
    }

    /// Uses caller-provided leaves (one per tensor, same order and shapes) as parameters.
    pub fn bind<'t>(&self, vars: Vec<Var<'t>>) -> Result<Params<'t>> {
        if vars.len() != self.tensors.len()
            || vars.iter().zip(&self.tensors).any(|(v, (_, t))| v.shape() != t.shape())
        {
            return Err(Error::invalid("bound variables do not match the weight layout"));
        }
        Ok(Params {
            config: self.config.clone(),
            index: Arc::clone(&self.index),
            vars,
        })
    }

    /// Writes the tensors and a `<path>.json` config sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, &self.tensors)?;
        let side = sidecar_path(path);
        let text = serde_json::to_string_pretty(&self.config).expect("config serializes");
        std::fs::write(&side, text).map_err(|e| Error::io(&side, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let side = sidecar_path(path);
        let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let config: ModelConfig = serde_json::from_str(&text).map_err(|e| Error::parse(format!("{}: {e}", side.display())))?;
        Self::from_named(config, checkpoint::load(path)?)
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Weights registered on a tape, addressed by name.
pub struct Params<'t> {
    config: ModelConfig,
    index: Arc<HashMap<String, usize>>,
    vars: Vec<Var<'t>>,
}

impl<'t> Params<'t> {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn get(&self, name: &str) -> Result<&Var<'t>> {
        self.index
            .get(name)
            .map(|&i| &self.vars[i])
            .ok_or_else(|| Error::invalid(format!("no parameter named {name}")))
    }

    /// Leaves in the same order as [`ModelWeights::tensors`].
    pub fn vars(&self) -> &[Var<'t>] {
        &self.vars
    }
}
