//! Model assembly: the four hypothesis spaces and the reversible composition.
//!
//! Reversible kinds evaluate T(x) = R(g^-1(R(g(x)))) where g is the layer
//! stack. Storing the layers once and running them inverted on the way back
//! ties the two parameter uses automatically; the architecture is R-reversible
//! at any parameter values, and symplectic whenever every layer is symplectic
//! and R is (anti-)symplectic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{
    Direction, HenonLayer, Layer, MlpNet, Parity, RealNvpLayer, SympNetActivationModule,
    SympNetLinearModule,
};
use crate::linalg::Mat;
use crate::region::Region;

const INVOLUTION_TOL: f64 = 1e-14;

/// Linear involution R (R^2 = identity), optionally checked anti-symplectic
/// (R^T J R = -J).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InvolutionData", into = "InvolutionData")]
pub struct Involution {
    matrix: Mat,
    antisymplectic: bool,
}

#[derive(Serialize, Deserialize, Clone)]
struct InvolutionData {
    /// Row-major square matrix, stored as rows.
    matrix: Vec<Vec<f64>>,
    antisymplectic: bool,
}

impl From<Involution> for InvolutionData {
    fn from(r: Involution) -> Self {
        InvolutionData {
            matrix: r.matrix.to_rows(),
            antisymplectic: r.antisymplectic,
        }
    }
}

impl TryFrom<InvolutionData> for Involution {
    type Error = Error;

    fn try_from(d: InvolutionData) -> Result<Self> {
        Involution::new(Mat::from_rows(&d.matrix), d.antisymplectic)
    }
}

impl Involution {
    pub fn new(matrix: Mat, antisymplectic: bool) -> Result<Self> {
        if matrix.rows != matrix.cols || matrix.rows == 0 {
            return Err(Error::invalid("involution", "matrix must be square"));
        }
        let d = matrix.rows;
        let residual = matrix.matmul(&matrix).sub(&Mat::identity(d)).max_abs();
        if residual > INVOLUTION_TOL {
            return Err(Error::NotAnInvolution { residual });
        }
        if antisymplectic {
            if d % 2 != 0 {
                return Err(Error::invalid(
                    "involution",
                    "anti-symplectic check needs even dimension",
                ));
            }
            let j = Mat::symplectic_j(d);
            let mut sum = matrix.transpose().matmul(&j).matmul(&matrix);
            for (s, jv) in sum.data.iter_mut().zip(&j.data) {
                *s += jv;
            }
            let res = sum.max_abs();
            if res > INVOLUTION_TOL {
                return Err(Error::NotAntiSymplectic { residual: res });
            }
        }
        Ok(Involution {
            matrix,
            antisymplectic,
        })
    }

    /// The reflection negating the momentum block (the second half of the
    /// coordinates): (q, p) -> (q, -p). Anti-symplectic for any even dim.
    pub fn momentum_reflection(dim: usize) -> Self {
        assert!(dim % 2 == 0 && dim > 0);
        let mut m = Mat::identity(dim);
        for i in dim / 2..dim {
            m.set(i, i, -1.0);
        }
        Involution {
            matrix: m,
            antisymplectic: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn is_antisymplectic(&self) -> bool {
        self.antisymplectic
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mat_vec(x)
    }

    /// Cotangent map: R^T u.
    pub fn apply_transpose(&self, u: &[f64]) -> Vec<f64> {
        self.matrix.transpose_vec(u)
    }
}

/// Hypothesis-space tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    MlpBaseline,
    ReversibleNvp,
    ReversibleHenon,
    SympNet,
}

impl ModelKind {
    pub fn is_reversible_composition(self) -> bool {
        matches!(self, ModelKind::ReversibleNvp | ModelKind::ReversibleHenon)
    }

    /// Kinds whose Jacobians satisfy M^T J M = J by construction.
    pub fn is_structurally_symplectic(self) -> bool {
        matches!(self, ModelKind::ReversibleHenon | ModelKind::SympNet)
    }
}

/// Creation provenance carried inside model files.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelMeta {
    pub init_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
    /// Convention connecting layer blocks to section coordinates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<String>,
    /// Snapshot of the creating configuration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<String>,
}

const COORDS_NOTE: &str = "(coordinate, momentum) blocks; involution negates the momentum block";

/// A trainable evolution map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub kind: ModelKind,
    pub dim: usize,
    pub involution: Option<Involution>,
    pub layers: Vec<Layer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<MlpNet>,
    pub meta: ModelMeta,
}

impl Model {
    pub fn mlp_baseline(net: MlpNet, meta: ModelMeta) -> Result<Self> {
        if net.in_dim() != net.out_dim() {
            return Err(Error::invalid("baseline", "net must map dim -> dim"));
        }
        let dim = net.in_dim();
        let model = Model {
            kind: ModelKind::MlpBaseline,
            dim,
            involution: None,
            layers: Vec::new(),
            baseline: Some(net),
            meta,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn reversible_nvp(
        layers: Vec<RealNvpLayer>,
        involution: Involution,
        meta: ModelMeta,
    ) -> Result<Self> {
        let dim = involution.dim();
        let model = Model {
            kind: ModelKind::ReversibleNvp,
            dim,
            involution: Some(involution),
            layers: layers.into_iter().map(Layer::RealNvp).collect(),
            baseline: None,
            meta,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn reversible_henon(
        layers: Vec<HenonLayer>,
        involution: Involution,
        meta: ModelMeta,
    ) -> Result<Self> {
        let dim = involution.dim();
        let model = Model {
            kind: ModelKind::ReversibleHenon,
            dim,
            involution: Some(involution),
            layers: layers.into_iter().map(Layer::Henon).collect(),
            baseline: None,
            meta,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn sympnet(modules: Vec<Layer>, dim: usize, meta: ModelMeta) -> Result<Self> {
        let model = Model {
            kind: ModelKind::SympNet,
            dim,
            involution: None,
            layers: modules,
            baseline: None,
            meta,
        };
        model.validate()?;
        Ok(model)
    }

    /// Structural invariants of the kind; also run after deserializing files.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("model", "dim must be positive"));
        }
        for l in &self.layers {
            if l.dim() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: l.dim(),
                });
            }
        }
        if let Some(r) = &self.involution {
            if r.dim() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: r.dim(),
                });
            }
        }
        match self.kind {
            ModelKind::MlpBaseline => {
                let net = self
                    .baseline
                    .as_ref()
                    .ok_or_else(|| Error::invalid("model", "baseline kind without a net"))?;
                if net.in_dim() != self.dim || net.out_dim() != self.dim {
                    return Err(Error::invalid("model", "baseline net dims"));
                }
                if !self.layers.is_empty() {
                    return Err(Error::invalid("model", "baseline kind carries no layers"));
                }
            }
            ModelKind::ReversibleNvp => {
                if self.involution.is_none() {
                    return Err(Error::invalid("model", "reversible kind needs an involution"));
                }
                if !self.layers.iter().all(|l| matches!(l, Layer::RealNvp(_))) {
                    return Err(Error::invalid("model", "nvp kind requires coupling layers"));
                }
            }
            ModelKind::ReversibleHenon => {
                if self.involution.is_none() {
                    return Err(Error::invalid("model", "reversible kind needs an involution"));
                }
                if !self.layers.iter().all(|l| matches!(l, Layer::Henon(_))) {
                    return Err(Error::invalid("model", "henon kind requires henon layers"));
                }
            }
            ModelKind::SympNet => {
                if !self
                    .layers
                    .iter()
                    .all(|l| matches!(l, Layer::SympLinear(_) | Layer::SympActivation(_)))
                {
                    return Err(Error::invalid("model", "sympnet kind requires sympnet modules"));
                }
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn involution_ref(&self) -> &Involution {
        self.involution
            .as_ref()
            .expect("validated reversible model carries an involution")
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        match self.kind {
            ModelKind::MlpBaseline => self.baseline.as_ref().unwrap().forward(x),
            ModelKind::SympNet => {
                let mut v = x.to_vec();
                for l in &self.layers {
                    v = l.apply(Direction::Forward, &v)?;
                }
                Ok(v)
            }
            ModelKind::ReversibleNvp | ModelKind::ReversibleHenon => {
                let r = self.involution_ref();
                let mut v = x.to_vec();
                for l in &self.layers {
                    v = l.apply(Direction::Forward, &v)?;
                }
                v = r.apply(&v);
                for l in self.layers.iter().rev() {
                    v = l.apply(Direction::Inverse, &v)?;
                }
                Ok(r.apply(&v))
            }
        }
    }

    /// Exact inverse: R(T(R(y))) for reversible kinds, module-by-module
    /// analytic inversion for SympNets. Not available for the baseline.
    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_input(y)?;
        match self.kind {
            ModelKind::MlpBaseline => Err(Error::UnsupportedForBaseline),
            ModelKind::SympNet => {
                let mut v = y.to_vec();
                for l in self.layers.iter().rev() {
                    v = l.apply(Direction::Inverse, &v)?;
                }
                Ok(v)
            }
            ModelKind::ReversibleNvp | ModelKind::ReversibleHenon => {
                let r = self.involution_ref();
                Ok(r.apply(&self.forward(&r.apply(y))?))
            }
        }
    }

    /// Reverse-mode products through the whole composition. For reversible
    /// kinds each layer's cotangent accumulates its forward and inverse use.
    /// Returns (input cotangent, flat parameter cotangent).
    pub fn vjp(&self, x: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_input(upstream)?;
        let (_, dx, dp) = self.vjp_through(x, |_| upstream.to_vec())?;
        Ok((dx, dp))
    }

    /// One forward pass, then a reverse sweep with the upstream cotangent
    /// derived from the output. Returns (output, input cotangent, flat
    /// parameter cotangent).
    pub fn vjp_through(
        &self,
        x: &[f64],
        upstream_of: impl FnOnce(&[f64]) -> Vec<f64>,
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        self.check_input(x)?;
        match self.kind {
            ModelKind::MlpBaseline => {
                let net = self.baseline.as_ref().unwrap();
                let trace = net.forward_trace(x)?;
                let upstream = upstream_of(&trace.output);
                let (dx, dp) = net.backward(&trace, &upstream)?;
                Ok((trace.output, dx, dp))
            }
            ModelKind::SympNet => {
                let mut stages = Vec::with_capacity(self.layers.len());
                let mut v = x.to_vec();
                for l in &self.layers {
                    stages.push(v.clone());
                    v = l.apply(Direction::Forward, &v)?;
                }
                let out = v;
                let mut cot = upstream_of(&out);
                let mut grads = vec![0.0; self.param_count()];
                let offsets = self.layer_offsets();
                for (i, l) in self.layers.iter().enumerate().rev() {
                    let (next, dp) = l.vjp(Direction::Forward, &stages[i], &cot)?;
                    cot = next;
                    for (g, d) in grads[offsets[i]..].iter_mut().zip(&dp) {
                        *g += d;
                    }
                }
                Ok((out, cot, grads))
            }
            ModelKind::ReversibleNvp | ModelKind::ReversibleHenon => {
                let r = self.involution_ref();
                let n = self.layers.len();

                let mut fwd_stages = Vec::with_capacity(n);
                let mut v = x.to_vec();
                for l in &self.layers {
                    fwd_stages.push(v.clone());
                    v = l.apply(Direction::Forward, &v)?;
                }
                v = r.apply(&v);
                // inv_stages[i] is the input to layer i's inverse application.
                let mut inv_stages = vec![Vec::new(); n];
                for (i, l) in self.layers.iter().enumerate().rev() {
                    inv_stages[i] = v.clone();
                    v = l.apply(Direction::Inverse, &v)?;
                }
                let out = r.apply(&v);

                let mut grads = vec![0.0; self.param_count()];
                let offsets = self.layer_offsets();
                let mut cot = r.apply_transpose(&upstream_of(&out));
                // Inverse chain applied layers n-1..0, so walk back 0..n-1.
                for (i, l) in self.layers.iter().enumerate() {
                    let (next, dp) = l.vjp(Direction::Inverse, &inv_stages[i], &cot)?;
                    cot = next;
                    for (g, d) in grads[offsets[i]..].iter_mut().zip(&dp) {
                        *g += d;
                    }
                }
                cot = r.apply_transpose(&cot);
                for (i, l) in self.layers.iter().enumerate().rev() {
                    let (next, dp) = l.vjp(Direction::Forward, &fwd_stages[i], &cot)?;
                    cot = next;
                    for (g, d) in grads[offsets[i]..].iter_mut().zip(&dp) {
                        *g += d;
                    }
                }
                Ok((out, cot, grads))
            }
        }
    }

    /// Exact Jacobian of T at x, chained from per-layer Jacobians (the
    /// involution contributes its matrix).
    pub fn jacobian(&self, x: &[f64]) -> Result<Mat> {
        self.check_input(x)?;
        match self.kind {
            ModelKind::MlpBaseline => self.baseline.as_ref().unwrap().input_jacobian(x),
            ModelKind::SympNet => {
                let mut total = Mat::identity(self.dim);
                let mut v = x.to_vec();
                for l in &self.layers {
                    total = l.jacobian(Direction::Forward, &v)?.matmul(&total);
                    v = l.apply(Direction::Forward, &v)?;
                }
                Ok(total)
            }
            ModelKind::ReversibleNvp | ModelKind::ReversibleHenon => {
                let r = self.involution_ref();
                let mut total = Mat::identity(self.dim);
                let mut v = x.to_vec();
                for l in &self.layers {
                    total = l.jacobian(Direction::Forward, &v)?.matmul(&total);
                    v = l.apply(Direction::Forward, &v)?;
                }
                total = r.matrix().matmul(&total);
                v = r.apply(&v);
                for l in self.layers.iter().rev() {
                    total = l.jacobian(Direction::Inverse, &v)?.matmul(&total);
                    v = l.apply(Direction::Inverse, &v)?;
                }
                Ok(r.matrix().matmul(&total))
            }
        }
    }

    /// Max over samples of ||(R o T)^2(x) - x||. Uses the model's involution,
    /// falling back to `r_override` for kinds that do not carry one.
    pub fn reversibility_residual(
        &self,
        r_override: Option<&Involution>,
        samples: &[Vec<f64>],
    ) -> Result<f64> {
        let r = self
            .involution
            .as_ref()
            .or(r_override)
            .ok_or_else(|| Error::invalid("reversibility check", "no involution available"))?;
        let mut worst = 0.0_f64;
        for x in samples {
            let mut v = r.apply(&self.forward(x)?);
            v = r.apply(&self.forward(&v)?);
            let diff: f64 = v
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(diff);
        }
        Ok(worst)
    }

    /// Max over samples of ||M(x)^T J M(x) - J||_max with M the exact chained Jacobian.
    pub fn symplecticity_residual(&self, samples: &[Vec<f64>]) -> Result<f64> {
        if self.dim % 2 != 0 {
            return Err(Error::invalid("symplecticity check", "odd dimension"));
        }
        let j = Mat::symplectic_j(self.dim);
        let mut worst = 0.0_f64;
        for x in samples {
            let m = self.jacobian(x)?;
            let res = m.transpose().matmul(&j).matmul(&m).sub(&j).max_abs();
            worst = worst.max(res);
        }
        Ok(worst)
    }

    /// Max over samples of ||inverse(forward(x)) - x||.
    pub fn inverse_consistency(&self, samples: &[Vec<f64>]) -> Result<f64> {
        let mut worst = 0.0_f64;
        for x in samples {
            let back = self.inverse(&self.forward(x)?)?;
            worst = worst.max(
                back.iter()
                    .zip(x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt(),
            );
        }
        Ok(worst)
    }

    pub fn param_count(&self) -> usize {
        match self.kind {
            ModelKind::MlpBaseline => self.baseline.as_ref().unwrap().param_count(),
            _ => self.layers.iter().map(Layer::param_count).sum(),
        }
    }

    /// Flat offsets of each layer's parameters.
    fn layer_offsets(&self) -> Vec<usize> {
        self.layers
            .iter()
            .scan(0, |acc, l| {
                let o = *acc;
                *acc += l.param_count();
                Some(o)
            })
            .collect()
    }

    /// Concatenation in layer order; each layer serializes its fields in
    /// declared order. Fixed so optimizer state is portable across runs.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        match self.kind {
            ModelKind::MlpBaseline => self.baseline.as_ref().unwrap().append_params(&mut out),
            _ => {
                for l in &self.layers {
                    l.append_params(&mut out);
                }
            }
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut src = params;
        match self.kind {
            ModelKind::MlpBaseline => self.baseline.as_mut().unwrap().load_params(&mut src),
            _ => {
                for l in self.layers.iter_mut() {
                    l.load_params(&mut src);
                }
            }
        }
        debug_assert!(src.is_empty());
        Ok(())
    }
}

// ── Standard hypothesis-space builders ──────────────────────────────────

impl Model {
    /// Plain MLP: `depth` affine layers of width `width` between dim-sized ends.
    pub fn build_mlp_baseline(dim: usize, depth: usize, width: usize, seed: u64) -> Result<Model> {
        if depth < 1 {
            return Err(Error::invalid("mlp baseline", "depth must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = Vec::with_capacity(depth + 1);
        dims.push(dim);
        dims.extend(std::iter::repeat(width).take(depth.saturating_sub(1)));
        dims.push(dim);
        let net = MlpNet::glorot(dims, &mut rng)?;
        Model::mlp_baseline(
            net,
            ModelMeta {
                init_seed: seed,
                coords: Some(COORDS_NOTE.to_string()),
                ..Default::default()
            },
        )
    }

    /// Reversible composition of Real NVP couplings with alternating masks.
    pub fn build_reversible_nvp(
        dim: usize,
        n_layers: usize,
        hidden: usize,
        seed: u64,
    ) -> Result<Model> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let split = dim / 2;
        let layers: Vec<RealNvpLayer> = (0..n_layers)
            .map(|i| RealNvpLayer::glorot(dim, split, i % 2 == 1, hidden, &mut rng))
            .collect::<Result<_>>()?;
        Model::reversible_nvp(
            layers,
            Involution::momentum_reflection(dim),
            ModelMeta {
                init_seed: seed,
                coords: Some(COORDS_NOTE.to_string()),
                ..Default::default()
            },
        )
    }

    /// Reversible composition of `depth` quartic Hénon layers (dim 2).
    pub fn build_reversible_henon(depth: usize, seed: u64) -> Result<Model> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers: Vec<HenonLayer> = (0..depth)
            .map(|_| HenonLayer::small_random(&mut rng))
            .collect();
        Model::reversible_henon(
            layers,
            Involution::momentum_reflection(2),
            ModelMeta {
                init_seed: seed,
                coords: Some(COORDS_NOTE.to_string()),
                ..Default::default()
            },
        )
    }

    /// SympNet stack: `depth` repetitions of a linear module (with
    /// `sublayers` unit-triangular factors) followed by an activation module
    /// of alternating parity.
    pub fn build_sympnet(dim: usize, depth: usize, sublayers: usize, seed: u64) -> Result<Model> {
        if dim % 2 != 0 {
            return Err(Error::invalid("sympnet", "dim must be even"));
        }
        let n = dim / 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut modules = Vec::with_capacity(2 * depth);
        for i in 0..depth {
            modules.push(Layer::SympLinear(SympNetLinearModule::small_random(
                n, sublayers, &mut rng,
            )));
            let parity = if i % 2 == 0 { Parity::Up } else { Parity::Low };
            modules.push(Layer::SympActivation(SympNetActivationModule::small_random(
                n, parity, &mut rng,
            )));
        }
        Model::sympnet(
            modules,
            dim,
            ModelMeta {
                init_seed: seed,
                coords: Some(COORDS_NOTE.to_string()),
                ..Default::default()
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn momentum_reflection_is_antisymplectic_involution() {
        for dim in [2, 4] {
            let r = Involution::momentum_reflection(dim);
            assert!(r.is_antisymplectic());
            let x: Vec<f64> = (0..dim).map(|i| i as f64 + 0.5).collect();
            let rr = r.apply(&r.apply(&x));
            assert_eq!(rr, x);
        }
    }

    #[test]
    fn bad_involutions_are_rejected() {
        let m = Mat::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]);
        assert!(matches!(
            Involution::new(m, false),
            Err(Error::NotAnInvolution { .. })
        ));
        // Identity is an involution but symplectic, not anti-symplectic.
        assert!(matches!(
            Involution::new(Mat::identity(2), true),
            Err(Error::NotAntiSymplectic { .. })
        ));
        assert!(Involution::new(Mat::identity(2), false).is_ok());
    }

    #[test]
    fn empty_reversible_model_is_identity() {
        let model = Model::reversible_henon(
            Vec::new(),
            Involution::momentum_reflection(2),
            ModelMeta::default(),
        )
        .unwrap();
        let x = vec![0.3, -0.8];
        assert_eq!(model.forward(&x).unwrap(), x);
    }

    /// One V = 0 layer with R = diag(1, -1): composing the four maps by hand,
    /// g = (x,y) -> (y,-x), R, g^-1 = (x,y) -> (-y,x), R gives T = -identity.
    #[test]
    fn single_zero_henon_layer_by_hand() {
        let model = Model::reversible_henon(
            vec![HenonLayer::new([0.0; 4])],
            Involution::momentum_reflection(2),
            ModelMeta::default(),
        )
        .unwrap();
        let z = vec![0.7, -0.2];
        // Hand composition: g(z) = (-0.2, -0.7); R -> (-0.2, 0.7);
        // g^-1 -> (-0.7, -0.2); R -> (-0.7, 0.2).
        assert_eq!(model.forward(&z).unwrap(), vec![-0.7, 0.2]);
    }

    #[test]
    fn reversible_kinds_invert_exactly() {
        let nvp = Model::build_reversible_nvp(2, 6, 16, 3).unwrap();
        let hr = Model::build_reversible_henon(25, 4).unwrap();
        let sn = Model::build_sympnet(2, 18, 8, 5).unwrap();
        let pts = random_points(1000, 17);
        for model in [&nvp, &hr, &sn] {
            let res = model.inverse_consistency(&pts).unwrap();
            assert!(res <= 1e-11, "{:?}: {res}", model.kind);
        }
    }

    #[test]
    fn baseline_has_no_inverse() {
        let model = Model::build_mlp_baseline(2, 6, 34, 1).unwrap();
        assert!(matches!(
            model.inverse(&[0.0, 0.0]),
            Err(Error::UnsupportedForBaseline)
        ));
    }

    #[test]
    fn structural_reversibility_at_random_parameters() {
        let pts = random_points(1000, 23);
        for seed in [1, 2, 3] {
            let nvp = Model::build_reversible_nvp(2, 6, 16, seed).unwrap();
            let hr = Model::build_reversible_henon(25, seed).unwrap();
            for model in [&nvp, &hr] {
                let res = model.reversibility_residual(None, &pts).unwrap();
                assert!(res <= 1e-11, "{:?} seed {seed}: {res}", model.kind);
            }
        }
    }

    #[test]
    fn structural_symplecticity_at_random_parameters() {
        let pts = random_points(1000, 29);
        for seed in [1, 2, 3] {
            let hr = Model::build_reversible_henon(25, seed).unwrap();
            let sn = Model::build_sympnet(2, 18, 8, seed).unwrap();
            for model in [&hr, &sn] {
                let res = model.symplecticity_residual(&pts).unwrap();
                assert!(res <= 1e-10, "{:?} seed {seed}: {res}", model.kind);
            }
        }
    }

    /// Real NVP couplings scale volume, so the reversible NVP stack is a
    /// negative control for symplecticity.
    #[test]
    fn nvp_is_generally_not_symplectic() {
        let pts = random_points(100, 31);
        let hit = (1..=3).any(|seed| {
            let m = Model::build_reversible_nvp(2, 6, 16, seed).unwrap();
            m.symplecticity_residual(&pts).unwrap() > 1e-2
        });
        assert!(hit, "all three NVP draws looked symplectic");
    }

    #[test]
    fn identity_model_has_zero_residuals() {
        let model = Model::reversible_henon(
            Vec::new(),
            Involution::momentum_reflection(2),
            ModelMeta::default(),
        )
        .unwrap();
        let pts = random_points(50, 37);
        assert_eq!(model.reversibility_residual(None, &pts).unwrap(), 0.0);
        assert_eq!(model.symplecticity_residual(&pts).unwrap(), 0.0);
        assert_eq!(model.param_count(), 0);
    }

    #[test]
    fn param_counts_match_construction() {
        let hr = Model::build_reversible_henon(25, 1).unwrap();
        assert_eq!(hr.param_count(), 100);
        let nn = Model::build_mlp_baseline(2, 6, 34, 1).unwrap();
        // 6 affine layers: 102 + 4 * 1190 + 70.
        assert_eq!(nn.param_count(), 4932);
        assert!((4500..=5500).contains(&nn.param_count()));
    }

    #[test]
    fn flat_params_round_trip() {
        let mut m = Model::build_reversible_nvp(2, 3, 8, 9).unwrap();
        let p = m.flat_params();
        assert_eq!(p.len(), m.param_count());
        let copy = m.clone();
        m.set_flat_params(&p).unwrap();
        assert_eq!(m, copy);
        let bad = vec![0.0; p.len() + 1];
        assert!(m.set_flat_params(&bad).is_err());
    }

    /// Gradients through every model kind against central finite differences
    /// of the scalar loss 1/2 ||T(x) - y||^2.
    #[test]
    fn model_vjp_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let models = vec![
            Model::build_mlp_baseline(2, 3, 8, 11).unwrap(),
            Model::build_reversible_nvp(2, 3, 8, 12).unwrap(),
            Model::build_reversible_henon(5, 13).unwrap(),
            Model::build_sympnet(2, 3, 4, 14).unwrap(),
        ];
        let h = 1e-6;
        for model in &models {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let out = model.forward(&x).unwrap();
            let upstream: Vec<f64> = out.iter().zip(&y).map(|(o, t)| o - t).collect();
            let (_, dp) = model.vjp(&x, &upstream).unwrap();

            let loss = |m: &Model| -> f64 {
                let o = m.forward(&x).unwrap();
                0.5 * o.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            };
            let flat = model.flat_params();
            let step = (flat.len() / 20).max(1);
            for k in (0..flat.len()).step_by(step) {
                let mut fp = flat.clone();
                let mut fm = flat.clone();
                fp[k] += h;
                fm[k] -= h;
                let mut mp = model.clone();
                let mut mm = model.clone();
                mp.set_flat_params(&fp).unwrap();
                mm.set_flat_params(&fm).unwrap();
                let fd = (loss(&mp) - loss(&mm)) / (2.0 * h);
                let rel = (dp[k] - fd).abs() / fd.abs().max(1e-9);
                assert!(rel <= 1e-5, "{:?} param {k}: {} vs {fd}", model.kind, dp[k]);
            }
        }
    }

    /// Depth-1 reversible Hénon closed form: T(x, y) = (2 V'(y) - x, -y), so
    /// dT1/da2 = 4y and the loss gradient w.r.t. a2 is (T1 - y1*) * 4y.
    #[test]
    fn henon_gradient_by_hand() {
        let coeffs = [0.1, -0.2, 0.05, 0.03];
        let model = Model::reversible_henon(
            vec![HenonLayer::new(coeffs)],
            Involution::momentum_reflection(2),
            ModelMeta::default(),
        )
        .unwrap();
        let z = [0.3, 0.7];
        let target = [0.0, 0.0];
        // Independent evaluation of the closed form.
        let y = z[1];
        let vp = coeffs[0] + 2.0 * coeffs[1] * y + 3.0 * coeffs[2] * y * y
            + 4.0 * coeffs[3] * y * y * y;
        let t1 = 2.0 * vp - z[0];
        let expected_grad_a2 = (t1 - target[0]) * 4.0 * y;

        let out = model.forward(&z).unwrap();
        assert!((out[0] - t1).abs() < 1e-15);
        assert!((out[1] + z[1]).abs() < 1e-15);
        let upstream: Vec<f64> = out.iter().zip(&target).map(|(o, t)| o - t).collect();
        let (_, dp) = model.vjp(&z, &upstream).unwrap();
        assert!(
            (dp[1] - expected_grad_a2).abs() <= 1e-12,
            "{} vs {expected_grad_a2}",
            dp[1]
        );
    }

    #[test]
    fn zero_upstream_zero_cotangents() {
        let model = Model::build_reversible_henon(4, 2).unwrap();
        let (dx, dp) = model.vjp(&[0.2, 0.4], &[0.0, 0.0]).unwrap();
        assert!(dx.iter().chain(dp.iter()).all(|v| *v == 0.0));
    }

    #[test]
    fn nvp_smoke_eval_at_scale() {
        let model = Model::build_reversible_nvp(2, 6, 16, 8).unwrap();
        let pts = random_points(10_000, 43);
        for p in &pts {
            let out = model.forward(p).unwrap();
            assert!(out.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn model_json_round_trip() {
        for model in [
            Model::build_mlp_baseline(2, 3, 8, 21).unwrap(),
            Model::build_reversible_nvp(2, 2, 8, 22).unwrap(),
            Model::build_reversible_henon(3, 23).unwrap(),
            Model::build_sympnet(2, 2, 3, 24).unwrap(),
        ] {
            let text = serde_json::to_string_pretty(&model).unwrap();
            let back: Model = serde_json::from_str(&text).unwrap();
            back.validate().unwrap();
            assert_eq!(back, model);
            // Serialization is deterministic.
            assert_eq!(serde_json::to_string_pretty(&back).unwrap(), text);
        }
    }
}
