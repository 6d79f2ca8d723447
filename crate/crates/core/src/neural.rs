//! Forward-only MLPs and embedding tables used inside causal mechanisms.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

pub const DEFAULT_HIDDEN_DIM: usize = 32;
pub const DEFAULT_DEPTH: usize = 2;

/// Truncation window of the `trunc-normal` initializer.
pub const TRUNC_NORMAL_BOUND: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Activation {
    Relu,
    Elu,
    Silu,
    Softsign,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Elu => {
                if x > T::zero() {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Silu => x / (T::one() + (-x).exp()),
            Activation::Softsign => x / (T::one() + x.abs()),
            Activation::Tanh => x.tanh(),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Elu => "elu",
            Activation::Silu => "silu",
            Activation::Softsign => "softsign",
            Activation::Tanh => "tanh",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "relu" => Activation::Relu,
            "elu" => Activation::Elu,
            "silu" | "swish" => Activation::Silu,
            "softsign" => Activation::Softsign,
            "tanh" => Activation::Tanh,
            _ => return Err(Error::Config(format!("unknown activation '{s}'"))),
        })
    }
}

impl TryFrom<String> for Activation {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Activation> for String {
    fn from(a: Activation) -> String {
        a.to_string()
    }
}

/// Weight initializer. Biases always start at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InitScheme {
    KaimingNormal,
    KaimingUniform,
    XavierNormal,
    XavierUniform,
    /// Standard normal truncated to `[-2, 2]`.
    TruncNormal,
    /// Zeroes this fraction of each weight matrix; the rest is standard normal.
    Sparse(f64),
}

impl fmt::Display for InitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitScheme::KaimingNormal => f.write_str("kaiming-normal"),
            InitScheme::KaimingUniform => f.write_str("kaiming-uniform"),
            InitScheme::XavierNormal => f.write_str("xavier-normal"),
            InitScheme::XavierUniform => f.write_str("xavier-uniform"),
            InitScheme::TruncNormal => f.write_str("trunc-normal"),
            InitScheme::Sparse(s) => write!(f, "sparse({s})"),
        }
    }
}

impl FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace([' ', '_'], "-");
        if let Some(inner) = key.strip_prefix("sparse(").and_then(|r| r.strip_suffix(')')) {
            let fraction: f64 = inner
                .parse()
                .map_err(|_| Error::Config(format!("bad sparsity in '{s}'")))?;
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::Config(format!("sparsity in '{s}' must lie in [0, 1]")));
            }
            return Ok(InitScheme::Sparse(fraction));
        }
        Ok(match key.as_str() {
            "kaiming-normal" => InitScheme::KaimingNormal,
            "kaiming-uniform" => InitScheme::KaimingUniform,
            "xavier-normal" => InitScheme::XavierNormal,
            "xavier-uniform" => InitScheme::XavierUniform,
            "trunc-normal" | "truncated-normal" => InitScheme::TruncNormal,
            _ => return Err(Error::Config(format!("unknown initialization '{s}'"))),
        })
    }
}

impl TryFrom<String> for InitScheme {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<InitScheme> for String {
    fn from(i: InitScheme) -> String {
        i.to_string()
    }
}

impl InitScheme {
    /// Weight matrix of shape `fan_out x fan_in`.
    pub fn weights<T: Scalar>(self, fan_in: usize, fan_out: usize, rng: &mut SeededRng) -> Result<Matrix<T>> {
        let (fi, fo) = (fan_in as f64, fan_out as f64);
        let draw = |rng: &mut SeededRng| -> Result<f64> {
            Ok(match self {
                InitScheme::KaimingNormal => rng.normal() * (2.0 / fi).sqrt(),
                InitScheme::KaimingUniform => {
                    let bound = (6.0 / fi).sqrt();
                    rng.uniform_range(-bound, bound)
                }
                InitScheme::XavierNormal => rng.normal() * (2.0 / (fi + fo)).sqrt(),
                InitScheme::XavierUniform => {
                    let bound = (6.0 / (fi + fo)).sqrt();
                    rng.uniform_range(-bound, bound)
                }
                InitScheme::TruncNormal => rng.truncated_normal(-TRUNC_NORMAL_BOUND, TRUNC_NORMAL_BOUND)?,
                InitScheme::Sparse(_) => rng.normal(),
            })
        };
        let mut data = Vec::with_capacity(fan_in * fan_out);
        for _ in 0..fan_in * fan_out {
            data.push(T::of(draw(rng)?));
        }
        if let InitScheme::Sparse(fraction) = self {
            let n = data.len();
            let zeros = (fraction * n as f64).round() as usize;
            for i in rng.sample_indices(n, zeros) {
                data[i] = T::zero();
            }
        }
        let mut it = data.into_iter();
        Ok(Matrix::from_fn(fan_out, fan_in, |_, _| it.next().expect("sized")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T> {
    /// `out x in`.
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(weight: Matrix<T>, bias: Vec<T>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::Usage(format!(
                "bias length {} does not match {} output rows",
                bias.len(),
                weight.rows()
            )));
        }
        Ok(Self { weight, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }
}

/// Feed-forward network; the activation follows every layer but the last.
#[derive(Clone, Debug, PartialEq)]
pub struct TinyMlp<T> {
    layers: Vec<Linear<T>>,
    activation: Activation,
    init: Option<InitScheme>,
}

impl<T: Scalar> TinyMlp<T> {
    /// Random network with layer widths `dims` (`dims.len() - 1` linear layers).
    pub fn random(dims: &[usize], init: InitScheme, activation: Activation, rng: &mut SeededRng) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Usage(format!("invalid MLP dimensions {dims:?}")));
        }
        let layers = dims
            .windows(2)
            .map(|w| Linear::new(init.weights(w[0], w[1], rng)?, vec![T::zero(); w[1]]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layers,
            activation,
            init: Some(init),
        })
    }

    pub fn from_layers(layers: Vec<Linear<T>>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Usage("an MLP needs at least one layer".into()));
        }
        if let Some(w) = layers.windows(2).find(|w| w[0].out_dim() != w[1].in_dim()) {
            return Err(Error::Usage(format!(
                "layer widths do not chain: {} -> {}",
                w[0].out_dim(),
                w[1].in_dim()
            )));
        }
        Ok(Self {
            layers,
            activation,
            init: None,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn init_scheme(&self) -> Option<InitScheme> {
        self.init
    }

    pub fn layers(&self) -> &[Linear<T>] {
        &self.layers
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.in_dim() {
            return Err(Error::Usage(format!(
                "MLP expects {} inputs, got {}",
                self.in_dim(),
                x.len()
            )));
        }
        let mut buf = MlpScratch::default();
        Ok(self.forward_with(x, &mut buf).to_vec())
    }

    /// Allocation-free forward pass; the result borrows `scratch`.
    pub fn forward_with<'s>(&self, x: &[T], scratch: &'s mut MlpScratch<T>) -> &'s [T] {
        debug_assert_eq!(x.len(), self.in_dim());
        let MlpScratch { a, b } = scratch;
        a.clear();
        a.extend_from_slice(x);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            b.clear();
            b.resize(layer.out_dim(), T::zero());
            layer.weight.matvec_into(a, b);
            for (v, bias) in b.iter_mut().zip(&layer.bias) {
                *v = *v + *bias;
                if i != last {
                    *v = self.activation.apply(*v);
                }
            }
            std::mem::swap(a, b);
        }
        a
    }
}

#[derive(Clone, Debug, Default)]
pub struct MlpScratch<T> {
    a: Vec<T>,
    b: Vec<T>,
}

/// Network with the default depth and hidden width.
pub fn init_mlp<T: Scalar>(
    in_dim: usize,
    out_dim: usize,
    init: InitScheme,
    activation: Activation,
    rng: &mut SeededRng,
) -> Result<TinyMlp<T>> {
    TinyMlp::random(&[in_dim, DEFAULT_HIDDEN_DIM, out_dim], init, activation, rng)
}

/// `C x d` table of category vectors. Categories are 1-based.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix<T> {
    table: Matrix<T>,
}

impl<T: Scalar> EmbeddingMatrix<T> {
    pub fn random(categories: usize, dim: usize, rng: &mut SeededRng) -> Self {
        Self {
            table: Matrix::from_fn(categories, dim, |_, _| T::of(rng.normal())),
        }
    }

    pub fn from_matrix(table: Matrix<T>) -> Self {
        Self { table }
    }

    pub fn num_categories(&self) -> usize {
        self.table.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn embed(&self, category: usize) -> Result<&[T]> {
        if category == 0 || category > self.num_categories() {
            return Err(Error::Usage(format!(
                "category {category} outside 1..={}",
                self.num_categories()
            )));
        }
        Ok(self.table.row(category - 1))
    }

    /// 1-based argmax of the inner products with each row; ties go to the
    /// lowest index and NaN scores never win.
    pub fn decode(&self, latent: &[T]) -> usize {
        let mut best = 0;
        let mut best_score = T::neg_infinity();
        for c in 0..self.num_categories() {
            let score = dot(self.table.row(c), latent);
            if score > best_score {
                best = c;
                best_score = score;
            }
        }
        best + 1
    }
}

pub fn embed_category<T: Scalar>(embedding: &EmbeddingMatrix<T>, category: usize) -> Result<&[T]> {
    embedding.embed(category)
}

pub fn decode_category<T: Scalar>(embedding: &EmbeddingMatrix<T>, latent: &[T]) -> usize {
    embedding.decode(latent)
}
