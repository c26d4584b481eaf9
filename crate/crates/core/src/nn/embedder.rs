//! Attribute embedder `P(a) = V · S(H(a))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::{InitKind, InitScheme};
use crate::linalg::Matrix;
use crate::nn::class_norm::{ClassNorm, ClassNormCache, Mode, DEFAULT_MOMENTUM};
use crate::nn::layers::{Activation, LayerSpec, Mlp, MlpCache};
use crate::nn::{GradientTape, Parameterized};
use crate::init::sample_init;
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub d_a: usize,
    /// Width of the body output. Ignored (taken as `d_a`) without body layers.
    pub d_h: usize,
    pub d_z: usize,
    pub n_hidden_layers: usize,
    pub class_norm: bool,
    pub body_init: InitScheme,
    pub output_init: InitScheme,
    pub momentum: f64,
}

impl EmbedderConfig {
    /// Body with class standardization and `V` drawn with variance `1/(d_z·d_h)`.
    pub fn with_class_norm(d_a: usize, d_h: usize, d_z: usize, n_hidden_layers: usize) -> Self {
        Self {
            d_a,
            d_h,
            d_z,
            n_hidden_layers,
            class_norm: true,
            body_init: InitScheme::uniform(InitKind::XavierFanIn),
            output_init: InitScheme::uniform(InitKind::CnOutput),
            momentum: DEFAULT_MOMENTUM,
        }
    }

    /// Xavier everywhere, no class standardization.
    pub fn plain(d_a: usize, d_h: usize, d_z: usize, n_hidden_layers: usize) -> Self {
        Self {
            d_a,
            d_h,
            d_z,
            n_hidden_layers,
            class_norm: false,
            body_init: InitScheme::uniform(InitKind::XavierFanIn),
            output_init: InitScheme::uniform(InitKind::XavierFanOut),
            momentum: DEFAULT_MOMENTUM,
        }
    }

    /// Dimension entering `V`.
    pub fn hidden_dim(&self) -> usize {
        if self.n_hidden_layers == 0 {
            self.d_a
        } else {
            self.d_h
        }
    }

    /// ReLU between body layers, identity on the body output.
    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        (0..self.n_hidden_layers)
            .map(|i| LayerSpec {
                in_dim: if i == 0 { self.d_a } else { self.d_h },
                out_dim: self.d_h,
                activation: if i + 1 == self.n_hidden_layers {
                    Activation::Identity
                } else {
                    Activation::Relu
                },
                init: self.body_init,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_a == 0 || self.d_z == 0 || (self.n_hidden_layers > 0 && self.d_h == 0) {
            return Err(Error::config(format!(
                "embedder dimensions must be positive (d_a={}, d_h={}, d_z={})",
                self.d_a, self.d_h, self.d_z
            )));
        }
        if !(self.momentum > 0.0 && self.momentum <= 1.0) {
            return Err(Error::config(format!("momentum must lie in (0, 1], got {}", self.momentum)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Embedder<T> {
    config: EmbedderConfig,
    body: Mlp<T>,
    class_norm: Option<ClassNorm<T>>,
    /// `d_h × d_z`.
    output: Matrix<T>,
    mode: Mode,
    version: u64,
}

/// Activations from one [`Embedder::forward`] call.
#[derive(Clone, Debug)]
pub struct EmbedderCache<T> {
    version: u64,
    body: MlpCache<T>,
    class_norm: Option<ClassNormCache<T>>,
    /// Input of the output projection.
    projected_input: Matrix<T>,
}

impl<T> EmbedderCache<T> {
    /// Hidden dimensions flagged as having no class spread in this pass.
    pub fn degenerate_dims(&self) -> &[usize] {
        self.class_norm.as_ref().map_or(&[], |c| c.degenerate_dims.as_slice())
    }

    /// Matrix fed to `V` (standardized hidden representation when enabled).
    pub fn projected_input(&self) -> &Matrix<T> {
        &self.projected_input
    }
}

impl<T: Scalar> Embedder<T> {
    pub fn init(config: EmbedderConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let body = Mlp::init(&config.layer_specs(), rng)?;
        let d_h = config.hidden_dim();
        let output = sample_init(config.output_init, d_h, config.d_z, Some(d_h), rng)?;
        let class_norm = if config.class_norm {
            Some(ClassNorm::new(d_h, config.momentum)?)
        } else {
            None
        };
        Ok(Self {
            config,
            body,
            class_norm,
            output,
            mode: Mode::Train,
            version: 0,
        })
    }

    /// Assembles an embedder from explicit parameters.
    pub fn from_parts(
        config: EmbedderConfig,
        body: Mlp<T>,
        class_norm: Option<ClassNorm<T>>,
        output: Matrix<T>,
    ) -> Result<Self> {
        config.validate()?;
        let d_h = config.hidden_dim();
        let specs = config.layer_specs();
        let body_ok = body.layers.len() == specs.len()
            && body.layers.iter().zip(&specs).all(|(l, s)| {
                l.weight.shape() == (s.in_dim, s.out_dim) && l.bias.shape() == (1, s.out_dim)
            });
        if !body_ok {
            return Err(Error::dim("body layers do not match the embedder configuration"));
        }
        if output.shape() != (d_h, config.d_z) {
            return Err(Error::dim(format!(
                "output matrix is {:?}, expected ({d_h}, {})",
                output.shape(),
                config.d_z
            )));
        }
        if class_norm.is_some() != config.class_norm || class_norm.as_ref().is_some_and(|c| c.dim() != d_h) {
            return Err(Error::dim("class norm state does not match the embedder configuration"));
        }
        Ok(Self {
            config,
            body,
            class_norm,
            output,
            mode: Mode::Train,
            version: 0,
        })
    }

    pub fn config(&self) -> &EmbedderConfig {
        &self.config
    }

    pub fn body(&self) -> &Mlp<T> {
        &self.body
    }

    pub fn class_norm(&self) -> Option<&ClassNorm<T>> {
        self.class_norm.as_ref()
    }

    pub fn output(&self) -> &Matrix<T> {
        &self.output
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Replaces `V`; invalidates outstanding caches.
    pub fn set_output(&mut self, v: Matrix<T>) -> Result<()> {
        if v.shape() != self.output.shape() {
            return Err(Error::dim(format!(
                "output matrix is {:?}, expected {:?}",
                v.shape(),
                self.output.shape()
            )));
        }
        self.output = v;
        self.version += 1;
        Ok(())
    }

    fn check_input(&self, a: &Matrix<T>) -> Result<()> {
        if a.cols() != self.config.d_a {
            return Err(Error::dim(format!(
                "attribute matrix has {} columns, embedder expects {}",
                a.cols(),
                self.config.d_a
            )));
        }
        Ok(())
    }

    /// Prototypes `W` (`K × d_z`) for the attribute rows of `a`. In train
    /// mode the class-norm running statistics are updated.
    pub fn forward(&mut self, a: &Matrix<T>) -> Result<(Matrix<T>, EmbedderCache<T>)> {
        self.check_input(a)?;
        let (h, body_cache) = self.body.forward(a)?;
        let (s, cn_cache) = match &mut self.class_norm {
            Some(cn) => {
                let (s, c) = cn.standardize(&h, self.mode)?;
                (s, Some(c))
            }
            None => (h, None),
        };
        let w = s.matmul(&self.output)?;
        Ok((
            w,
            EmbedderCache {
                version: self.version,
                body: body_cache,
                class_norm: cn_cache,
                projected_input: s,
            },
        ))
    }

    /// Eval-mode prototypes without touching any state.
    pub fn predict(&self, a: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_input(a)?;
        let h = self.body.predict(a)?;
        let s = match &self.class_norm {
            Some(cn) => cn.apply_running(&h)?,
            None => h,
        };
        s.matmul(&self.output)
    }

    /// Parameter gradients for upstream gradient `d_w` on the prototypes.
    pub fn backward(&self, cache: &EmbedderCache<T>, d_w: &Matrix<T>) -> Result<GradientTape<T>> {
        if cache.version != self.version {
            return Err(Error::State(
                "cache was produced before the last parameter update".into(),
            ));
        }
        let expected = (cache.projected_input.rows(), self.config.d_z);
        if d_w.shape() != expected {
            return Err(Error::dim(format!(
                "prototype gradient is {:?}, expected {expected:?}",
                d_w.shape()
            )));
        }
        let d_v = cache.projected_input.t_matmul(d_w)?;
        let d_s = d_w.matmul_t(&self.output)?;
        let d_h = match &cache.class_norm {
            Some(c) => c.backward(&d_s)?,
            None => d_s,
        };
        let body = self.body.backward(&cache.body, &d_h)?;
        let mut grads = Vec::with_capacity(2 * body.layers.len() + 1);
        for (dw, db) in body.layers {
            grads.push(dw);
            grads.push(db);
        }
        grads.push(d_v);
        Ok(GradientTape::new(grads))
    }
}

impl<T: Scalar> Parameterized<T> for Embedder<T> {
    fn parameters(&self) -> Vec<&Matrix<T>> {
        let mut out: Vec<&Matrix<T>> = Vec::new();
        for l in &self.body.layers {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        out.push(&self.output);
        out
    }

    fn parameters_mut(&mut self) -> Vec<&mut Matrix<T>> {
        self.version += 1;
        let mut out: Vec<&mut Matrix<T>> = Vec::new();
        for l in &mut self.body.layers {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out.push(&mut self.output);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;

    fn small(layers: usize, cn: bool) -> EmbedderConfig {
        let mut c = EmbedderConfig::with_class_norm(4, 5, 6, layers);
        c.class_norm = cn;
        c
    }

    #[test]
    fn identity_pipeline() {
        let cfg = EmbedderConfig {
            class_norm: false,
            ..EmbedderConfig::plain(3, 3, 3, 0)
        };
        let mut e = Embedder::<f64>::init(cfg, &mut Rng::seed_from(0)).unwrap();
        e.set_output(Matrix::identity(3)).unwrap();
        let a: Matrix<f64> = Rng::seed_from(1).normal_matrix(4, 3);
        assert_eq!(e.forward(&a).unwrap().0, a);
    }

    #[test]
    fn zero_output_annihilates() {
        let mut e = Embedder::<f64>::init(small(2, true), &mut Rng::seed_from(0)).unwrap();
        e.set_output(Matrix::zeros(5, 6)).unwrap();
        let a: Matrix<f64> = Rng::seed_from(1).normal_matrix(3, 4);
        assert_eq!(e.forward(&a).unwrap().0, Matrix::zeros(3, 6));
    }

    #[test]
    fn forward_matches_straight_line_reimplementation() {
        let mut e = Embedder::<f64>::init(small(2, true), &mut Rng::seed_from(5)).unwrap();
        let a: Matrix<f64> = Rng::seed_from(6).normal_matrix(7, 4);
        let (w, _) = e.forward(&a).unwrap();

        let l0 = &e.body().layers[0];
        let l1 = &e.body().layers[1];
        let mut h = vec![vec![0.0; 5]; 7];
        for c in 0..7 {
            let mut hidden = [0.0; 5];
            for (j, hj) in hidden.iter_mut().enumerate() {
                let mut acc = l0.bias[(0, j)];
                for i in 0..4 {
                    acc += a[(c, i)] * l0.weight[(i, j)];
                }
                *hj = acc.max(0.0);
            }
            for j in 0..5 {
                let mut acc = l1.bias[(0, j)];
                for (i, hi) in hidden.iter().enumerate() {
                    acc += hi * l1.weight[(i, j)];
                }
                h[c][j] = acc;
            }
        }
        for j in 0..5 {
            let mean = h.iter().map(|r| r[j]).sum::<f64>() / 7.0;
            let var = h.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / 7.0;
            for r in h.iter_mut() {
                r[j] = (r[j] - mean) / (var + 1e-10).sqrt();
            }
        }
        for c in 0..7 {
            for k in 0..6 {
                let col = e.output().col(k);
                let want = dot(&h[c], &col);
                assert!((w[(c, k)] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn eval_predict_is_pure() {
        let mut e = Embedder::<f64>::init(small(2, true), &mut Rng::seed_from(2)).unwrap();
        let a: Matrix<f64> = Rng::seed_from(3).normal_matrix(3, 4);
        e.forward(&a).unwrap();
        let snapshot = e.clone();
        let p1 = e.predict(&a).unwrap();
        let p2 = e.predict(&a).unwrap();
        assert_eq!(p1, p2);
        e.set_mode(Mode::Eval);
        let (p3, _) = e.forward(&a).unwrap();
        assert_eq!(p1, p3);
        e.set_mode(Mode::Train);
        assert_eq!(e, snapshot);
    }

    #[test]
    fn stale_cache_rejected() {
        let mut e = Embedder::<f64>::init(small(1, true), &mut Rng::seed_from(2)).unwrap();
        let a: Matrix<f64> = Rng::seed_from(3).normal_matrix(3, 4);
        let (_, cache) = e.forward(&a).unwrap();
        e.parameters_mut()[0].as_mut_slice()[0] += 1.0;
        assert!(matches!(e.backward(&cache, &Matrix::zeros(3, 6)), Err(Error::State(_))));
    }

    #[test]
    fn backward_linearity() {
        let mut e = Embedder::<f64>::init(small(2, true), &mut Rng::seed_from(8)).unwrap();
        let a: Matrix<f64> = Rng::seed_from(9).normal_matrix(3, 4);
        let (_, cache) = e.forward(&a).unwrap();
        let zero = e.backward(&cache, &Matrix::zeros(3, 6)).unwrap();
        assert!(zero.iter().all(|g| g.max_abs() == 0.0));
        let up: Matrix<f64> = Rng::seed_from(10).normal_matrix(3, 6);
        let g1 = e.backward(&cache, &up).unwrap();
        let g2 = e.backward(&cache, &up.scale(2.0)).unwrap();
        for (a, b) in g1.iter().zip(g2.iter()) {
            assert_eq!(a.scale(2.0), *b);
        }
    }

    #[test]
    fn gradient_shapes_mirror_parameters() {
        for layers in 0..4 {
            let mut e = Embedder::<f64>::init(small(layers, true), &mut Rng::seed_from(1)).unwrap();
            let a: Matrix<f64> = Rng::seed_from(2).normal_matrix(3, 4);
            let (_, cache) = e.forward(&a).unwrap();
            let tape = e.backward(&cache, &Matrix::filled(3, 6, 1.0)).unwrap();
            let shapes: Vec<_> = e.parameters().iter().map(|p| p.shape()).collect();
            let got: Vec<_> = tape.iter().map(|g| g.shape()).collect();
            assert_eq!(shapes, got);
        }
    }
}
