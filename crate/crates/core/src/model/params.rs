use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{IrnError, Result};
use crate::kb::RelationId;
use crate::numerics::{Prng, Tensor2};

/// Standard deviation of embedding rows at initialisation.
pub const EMBED_INIT_STD: f64 = 0.1;

/// All learned tensors. The last row of `rel_emb` is the `Terminal`
/// relation.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub word_emb: Tensor2,
    pub ent_emb: Tensor2,
    pub rel_emb: Tensor2,
    /// relation space → question space
    pub m_rq: Tensor2,
    /// relation space → state space
    pub m_rs: Tensor2,
    /// state space → entity space
    pub m_se: Tensor2,
}

/// Gradients share the parameter layout.
pub type Gradients = ModelParams;

pub const TENSOR_NAMES: [&str; 6] = ["word_emb", "ent_emb", "rel_emb", "m_rq", "m_rs", "m_se"];

impl ModelParams {
    /// `n_relations` counts KB relations only; a `Terminal` row is appended.
    pub fn init(
        dim: usize,
        vocab: usize,
        n_entities: usize,
        n_relations: usize,
        seed: u64,
    ) -> Self {
        let mut rng = Prng::stream(seed, "init");
        let normal = Normal::new(0.0, EMBED_INIT_STD).expect("valid std");
        let mut emb = |rows: usize| {
            let data = (0..rows * dim).map(|_| normal.sample(&mut rng)).collect();
            Tensor2::from_vec(rows, dim, data).expect("shape")
        };
        let word_emb = emb(vocab);
        let ent_emb = emb(n_entities);
        let rel_emb = emb(n_relations + 1);
        let bound = xavier_bound(dim);
        let uniform = Uniform::new_inclusive(-bound, bound).expect("valid bound");
        let mut square = || {
            let data = (0..dim * dim).map(|_| uniform.sample(&mut rng)).collect();
            Tensor2::from_vec(dim, dim, data).expect("shape")
        };
        let m_rq = square();
        let m_rs = square();
        let m_se = square();
        ModelParams {
            word_emb,
            ent_emb,
            rel_emb,
            m_rq,
            m_rs,
            m_se,
        }
    }

    pub fn zeros_like(other: &ModelParams) -> Self {
        let z = |t: &Tensor2| Tensor2::zeros(t.rows(), t.cols());
        ModelParams {
            word_emb: z(&other.word_emb),
            ent_emb: z(&other.ent_emb),
            rel_emb: z(&other.rel_emb),
            m_rq: z(&other.m_rq),
            m_rs: z(&other.m_rs),
            m_se: z(&other.m_se),
        }
    }

    pub fn dim(&self) -> usize {
        self.ent_emb.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.word_emb.rows()
    }

    pub fn num_entities(&self) -> usize {
        self.ent_emb.rows()
    }

    /// KB relations plus `Terminal`.
    pub fn num_relations_with_terminal(&self) -> usize {
        self.rel_emb.rows()
    }

    pub fn terminal(&self) -> RelationId {
        self.rel_emb.rows() - 1
    }

    pub fn tensors(&self) -> [&Tensor2; 6] {
        [
            &self.word_emb,
            &self.ent_emb,
            &self.rel_emb,
            &self.m_rq,
            &self.m_rs,
            &self.m_se,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor2; 6] {
        [
            &mut self.word_emb,
            &mut self.ent_emb,
            &mut self.rel_emb,
            &mut self.m_rq,
            &mut self.m_rs,
            &mut self.m_se,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    pub fn fill(&mut self, v: f64) {
        for t in self.tensors_mut() {
            t.fill(v);
        }
    }

    pub fn add_assign(&mut self, other: &ModelParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    /// Checks internal consistency of the six shapes.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        for (name, t) in TENSOR_NAMES.iter().zip(self.tensors()) {
            if t.cols() != d {
                return Err(IrnError::Shape(format!(
                    "{name} has {} columns, d = {d}",
                    t.cols()
                )));
            }
        }
        for (name, t) in TENSOR_NAMES[3..].iter().zip(&self.tensors()[3..]) {
            if t.rows() != d {
                return Err(IrnError::Shape(format!("{name} must be {d}x{d}")));
            }
        }
        if self.rel_emb.rows() < 1 {
            return Err(IrnError::Shape("rel_emb lacks the Terminal row".into()));
        }
        if !self.is_finite() {
            return Err(IrnError::NonFinite("model parameters"));
        }
        Ok(())
    }
}

pub fn xavier_bound(dim: usize) -> f64 {
    (6.0 / (2 * dim) as f64).sqrt()
}
