//! The adaptive-subspace self-organizing map.
//!
//! Each module owns an orthonormal [`BasisSet`]. Modules compete on the
//! squared reconstruction residual of an episode; every module is then
//! rotated toward the inputs with a strength given by a Gaussian kernel of
//! the distance between its reconstruction and the winner's. After the
//! gradient step, small basis components are dissipated and each basis is
//! re-orthonormalized.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::subspace::{gram_schmidt, BasisSet};
use crate::{seeded_rng, Error, Result};

const INIT_RETRIES: usize = 16;

/// Hyperparameters for [`AssomNetwork::train`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub eta_start: f64,
    pub eta_end: f64,
    /// Width of the reconstruction-distance kernel.
    pub sigma: f64,
    /// Dissipation constant; 0 disables dissipation.
    pub alpha: f64,
    /// Number of samples competing as one unit.
    pub episode_size: usize,
    pub seed: u64,
    /// Lower bound for the `|x_hat| |x|` normalizer of the update.
    pub denom_floor: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 100,
            eta_start: 0.1,
            eta_end: 0.001,
            sigma: 1.0,
            alpha: 1e-4,
            episode_size: 1,
            seed: 0,
            denom_floor: 1e-9,
        }
    }
}

impl TrainingConfig {
    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("training: {m}")));
        if !(self.eta_start > 0.0 && self.eta_start <= 1.0) {
            return bad("eta_start must lie in (0, 1]");
        }
        if !(self.eta_end > 0.0 && self.eta_end <= self.eta_start) {
            return bad("eta_end must lie in (0, eta_start]");
        }
        if !(self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if !(self.alpha >= 0.0) {
            return bad("alpha must be non-negative");
        }
        if self.episode_size == 0 {
            return bad("episode_size must be positive");
        }
        if !(self.denom_floor > 0.0) {
            return bad("denom_floor must be positive");
        }
        Ok(())
    }

    /// Learning rate for `epoch`, decaying linearly from `eta_start` to
    /// `eta_end` over the configured number of epochs.
    pub fn eta(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.eta_start;
        }
        let frac = epoch as f64 / (self.epochs - 1) as f64;
        self.eta_start + (self.eta_end - self.eta_start) * frac
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssomModule {
    pub index: usize,
    pub basis: BasisSet,
    /// Basis at the start of the current epoch; reference for dissipation.
    pub prev_basis: BasisSet,
}

impl AssomModule {
    fn new(index: usize, basis: BasisSet) -> Self {
        AssomModule {
            index,
            prev_basis: basis.clone(),
            basis,
        }
    }
}

/// Per-epoch diagnostics recorded by [`AssomNetwork::train`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub cost: Vec<f64>,
    pub orthonormality_error: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssomNetwork {
    modules: Vec<AssomModule>,
    dim: usize,
    subspace_dim: usize,
}

/// Builds `n` modules with random orthonormal bases of dimension `h` in
/// `R^d`. Deterministic in `(d, h, n, seed)`.
pub fn init_network(d: usize, h: usize, n: usize, seed: u64) -> Result<AssomNetwork> {
    if h == 0 || h > d || n == 0 {
        return Err(Error::Config(format!(
            "network needs 1 <= H <= D and N >= 1, got D={d} H={h} N={n}"
        )));
    }
    let mut rng = seeded_rng(seed, 0);
    let mut modules = Vec::with_capacity(n);
    for index in 0..n {
        let mut last_err = None;
        let mut basis = None;
        for _ in 0..INIT_RETRIES {
            let raw = Array2::from_shape_fn((h, d), |_| rng.random_range(-1.0..1.0));
            match gram_schmidt(raw.view()) {
                Ok(b) => {
                    basis = Some(b);
                    break;
                }
                Err(e) => last_err = Some(e),
            }
        }
        match basis {
            Some(b) => modules.push(AssomModule::new(index, b)),
            None => return Err(last_err.expect("at least one attempt")),
        }
    }
    Ok(AssomNetwork {
        modules,
        dim: d,
        subspace_dim: h,
    })
}

/// `exp(-|a - b|^2 / (2 sigma^2))`.
pub fn neighborhood_kernel(xhat_winner: ArrayView1<f64>, xhat_n: ArrayView1<f64>, sigma: f64) -> f64 {
    let dist_sq: f64 = xhat_winner
        .iter()
        .zip(xhat_n.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    (-dist_sq / (2.0 * sigma * sigma)).exp()
}

/// Gradient of the per-sample residual energy `g |x_tilde|^2` with respect
/// to a unit basis vector `b`, holding `g` fixed: `-2 g (x^T b) x`.
pub fn basis_gradient(g: f64, x: ArrayView1<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let xb = x.dot(&b);
    x.mapv(|v| -2.0 * g * xb * v)
}

/// Componentwise shrink toward zero: each entry loses
/// `alpha * |b_now - b_prev|` of its magnitude, clamped at zero.
pub fn dissipate(b_now: ArrayView1<f64>, b_prev: ArrayView1<f64>, alpha: f64) -> Array1<f64> {
    let mut out = Array1::zeros(b_now.len());
    Zip::from(&mut out)
        .and(&b_now)
        .and(&b_prev)
        .for_each(|o, &now, &prev| {
            let eps = alpha * (now - prev).abs();
            let mag = (now.abs() - eps).max(0.0);
            *o = if mag == 0.0 { 0.0 } else { now.signum() * mag };
        });
    out
}

/// Applies `b_i <- b_i + lambda (x^T b_i) x / max(|x_hat| |x|, floor)` to
/// every row of `vectors` in place.
fn rotate_toward(vectors: &mut Array2<f64>, x: ArrayView1<f64>, xhat_norm: f64, lambda_bar: f64, denom_floor: f64) {
    if lambda_bar == 0.0 {
        return;
    }
    let denom = (xhat_norm * x.dot(&x).sqrt()).max(denom_floor);
    let scale = lambda_bar / denom;
    for mut b in vectors.rows_mut() {
        let xb = x.dot(&b);
        b.scaled_add(scale * xb, &x);
    }
}

/// One normalized gradient step for a single module and sample.
///
/// Returns the updated basis vectors as rows. They are generally no longer
/// orthonormal; training dissipates and re-orthonormalizes them afterwards.
pub fn update_module(module: &AssomModule, x: ArrayView1<f64>, lambda_bar: f64, denom_floor: f64) -> Result<Array2<f64>> {
    let xhat = module.basis.project(x)?;
    let mut vectors = module.basis.vectors().to_owned();
    rotate_toward(&mut vectors, x, xhat.dot(&xhat).sqrt(), lambda_bar, denom_floor);
    Ok(vectors)
}

/// Splits the rows of `data` into consecutive episodes of `size` rows (the
/// last one may be shorter).
pub fn episodes(data: ArrayView2<'_, f64>, size: usize) -> Vec<ArrayView2<'_, f64>> {
    let size = size.max(1);
    (0..data.nrows())
        .step_by(size)
        .map(|start| data.slice_move(s![start..(start + size).min(data.nrows()), ..]))
        .collect()
}

impl AssomNetwork {
    pub fn modules(&self) -> &[AssomModule] {
        &self.modules
    }

    pub fn module_count(&self) -> usize {
        self.modules.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn subspace_dim(&self) -> usize {
        self.subspace_dim
    }

    /// Builds a network from explicit orthonormal bases.
    pub fn from_bases(bases: Vec<BasisSet>) -> Result<Self> {
        let first = bases
            .first()
            .ok_or_else(|| Error::Config("network needs at least one module".into()))?;
        let (dim, subspace_dim) = (first.dim(), first.subspace_dim());
        if let Some(b) = bases
            .iter()
            .find(|b| b.dim() != dim || b.subspace_dim() != subspace_dim)
        {
            return Err(Error::Config(format!(
                "all modules must share D={dim} and H={subspace_dim}, found D={} H={}",
                b.dim(),
                b.subspace_dim()
            )));
        }
        Ok(AssomNetwork {
            modules: bases
                .into_iter()
                .enumerate()
                .map(|(i, b)| AssomModule::new(i, b))
                .collect(),
            dim,
            subspace_dim,
        })
    }

    /// Largest `max |BB^T - I|` over all modules.
    pub fn orthonormality_error(&self) -> f64 {
        self.modules
            .iter()
            .map(|m| m.basis.orthonormality_error())
            .fold(0.0, f64::max)
    }

    fn check_rows(&self, rows: ArrayView2<f64>) -> Result<()> {
        if rows.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: rows.ncols(),
            });
        }
        Ok(())
    }

    /// Reconstruction of `x` through every module, in module order.
    pub fn reconstruct_all(&self, x: ArrayView1<f64>) -> Result<Vec<Array1<f64>>> {
        self.modules.iter().map(|m| m.basis.project(x)).collect()
    }

    /// Index of the module with the smallest summed squared residual over
    /// the episode. Ties go to the lowest index.
    pub fn find_winner(&self, episode: ArrayView2<f64>) -> Result<usize> {
        self.check_rows(episode)?;
        let mut best = (0, f64::INFINITY);
        for m in &self.modules {
            let mut total = 0.0;
            for x in episode.rows() {
                total += m.basis.residual_sq(x)?;
            }
            if total < best.1 {
                best = (m.index, total);
            }
        }
        Ok(best.0)
    }

    /// Kernel-weighted residual energy
    /// `E = sum_n sum_t g_c^n(t) |x_tilde^n(t)|^2`, with `c` the winner of
    /// each episode.
    pub fn cost(&self, episodes: &[ArrayView2<f64>], sigma: f64) -> Result<f64> {
        let mut total = 0.0;
        for episode in episodes {
            let c = self.find_winner(*episode)?;
            for x in episode.rows() {
                let recon = self.reconstruct_all(x)?;
                for xhat in &recon {
                    let g = neighborhood_kernel(recon[c].view(), xhat.view(), sigma);
                    let r = &x - xhat;
                    total += g * r.dot(&r);
                }
            }
        }
        Ok(total)
    }

    /// Trains in place on the rows of `data`.
    ///
    /// Every epoch shuffles the rows, then for each episode: picks the
    /// winner, rotates every module toward each sample with rate
    /// `eta * g`, dissipates against the epoch-start basis, and
    /// re-orthonormalizes.
    pub fn train(&mut self, data: ArrayView2<f64>, config: &TrainingConfig) -> Result<TrainingHistory> {
        config.validate()?;
        self.check_rows(data)?;
        if let Some((r, c, v)) = data
            .indexed_iter()
            .find(|(_, v)| !v.is_finite())
            .map(|((r, c), v)| (r, c, *v))
        {
            return Err(Error::NonFinite { row: r, column: c, value: v });
        }
        let mut history = TrainingHistory::default();
        if data.nrows() == 0 || config.epochs == 0 {
            return Ok(history);
        }
        let mut rng = seeded_rng(config.seed, 1);
        let mut order: Vec<usize> = (0..data.nrows()).collect();
        let fixed_episodes = episodes(data, config.episode_size);

        for epoch in 0..config.epochs {
            let eta = config.eta(epoch);
            for m in &mut self.modules {
                m.prev_basis = m.basis.clone();
            }
            order.shuffle(&mut rng);
            let shuffled = data.select(Axis(0), &order);
            for episode in episodes(shuffled.view(), config.episode_size) {
                self.train_episode(episode, eta, config)
                    .map_err(|(module, e)| Error::TrainingCollapse {
                        epoch,
                        module,
                        source: Box::new(e),
                    })?;
            }
            let cost = self.cost(&fixed_episodes, config.sigma)?;
            let ortho = self.orthonormality_error();
            log::debug!("epoch {epoch}: eta={eta:.5} E={cost:.6e} ortho={ortho:.2e}");
            history.cost.push(cost);
            history.orthonormality_error.push(ortho);
        }
        Ok(history)
    }

    fn train_episode(&mut self, episode: ArrayView2<f64>, eta: f64, config: &TrainingConfig) -> Result<(), (usize, Error)> {
        let c = self.find_winner(episode).map_err(|e| (0, e))?;
        let mut raw: Vec<Array2<f64>> = self
            .modules
            .iter()
            .map(|m| m.basis.vectors().to_owned())
            .collect();
        // Reconstructions use the episode-start bases, which are orthonormal.
        for x in episode.rows() {
            let recon = self.reconstruct_all(x).map_err(|e| (0, e))?;
            for (n, vectors) in raw.iter_mut().enumerate() {
                let g = neighborhood_kernel(recon[c].view(), recon[n].view(), config.sigma);
                let xhat_norm = recon[n].dot(&recon[n]).sqrt();
                rotate_toward(vectors, x, xhat_norm, eta * g, config.denom_floor);
            }
        }
        for (m, mut vectors) in self.modules.iter_mut().zip(raw) {
            if config.alpha > 0.0 {
                for (mut b, prev) in vectors.rows_mut().into_iter().zip(m.prev_basis.vectors().rows()) {
                    let d = dissipate(b.view(), prev, config.alpha);
                    b.assign(&d);
                }
            }
            m.basis = gram_schmidt(vectors.view()).map_err(|e| (m.index, e))?;
        }
        Ok(())
    }

    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument {
            version: NetworkDocument::VERSION,
            dim: self.dim,
            subspace_dim: self.subspace_dim,
            module_count: self.modules.len(),
            modules: self
                .modules
                .iter()
                .map(|m| ModuleDocument {
                    index: m.index,
                    basis: m.basis.vectors().rows().into_iter().map(|r| r.to_vec()).collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("network document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDocument = serde_json::from_str(text).map_err(|e| Error::format("network document", e))?;
        doc.into_network()
    }
}

/// Free-function form of [`AssomNetwork::train`].
pub fn train(mut network: AssomNetwork, data: ArrayView2<f64>, config: &TrainingConfig) -> Result<(AssomNetwork, TrainingHistory)> {
    let history = network.train(data, config)?;
    Ok((network, history))
}

/// Versioned JSON form of a trained network.
///
/// Floats are written in shortest round-trip form, so reading a document
/// back yields bit-identical bases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub version: u32,
    #[serde(rename = "D")]
    pub dim: usize,
    #[serde(rename = "H")]
    pub subspace_dim: usize,
    #[serde(rename = "N")]
    pub module_count: usize,
    pub modules: Vec<ModuleDocument>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleDocument {
    pub index: usize,
    pub basis: Vec<Vec<f64>>,
}

impl NetworkDocument {
    pub const VERSION: u32 = 1;

    pub fn into_network(self) -> Result<AssomNetwork> {
        let invalid = |m: String| Err(Error::format("network document", m));
        if self.version != Self::VERSION {
            return invalid(format!("unsupported version {}", self.version));
        }
        if self.modules.len() != self.module_count {
            return invalid(format!("N={} but {} modules listed", self.module_count, self.modules.len()));
        }
        let mut bases = Vec::with_capacity(self.modules.len());
        for (i, m) in self.modules.into_iter().enumerate() {
            if m.index != i {
                return invalid(format!("module {i} has index {}", m.index));
            }
            if m.basis.len() != self.subspace_dim || m.basis.iter().any(|r| r.len() != self.dim) {
                return invalid(format!("module {i} basis is not {}x{}", self.subspace_dim, self.dim));
            }
            let flat: Vec<f64> = m.basis.into_iter().flatten().collect();
            let arr = Array2::from_shape_vec((self.subspace_dim, self.dim), flat).expect("shape checked");
            bases.push(BasisSet::from_orthonormal(arr)?);
        }
        AssomNetwork::from_bases(bases)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    fn axis_network() -> AssomNetwork {
        AssomNetwork::from_bases(vec![
            BasisSet::from_orthonormal(array![[1.0, 0.0]]).unwrap(),
            BasisSet::from_orthonormal(array![[0.0, 1.0]]).unwrap(),
        ])
        .unwrap()
    }

    fn random_rows(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = seeded_rng(seed, 9);
        Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_network(3, 1, 2, 7).unwrap();
        let b = init_network(3, 1, 2, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_network(3, 1, 2, 8).unwrap());
    }

    #[test]
    fn init_full_rank_is_identity_projector() {
        let net = init_network(2, 2, 1, 1234).unwrap();
        let p = net.modules()[0].basis.projector();
        let e = p.entries();
        assert!((e[[0, 0]] - 1.0).abs() < 1e-12 && (e[[1, 1]] - 1.0).abs() < 1e-12);
        assert!(e[[0, 1]].abs() < 1e-12);
    }

    #[test]
    fn init_bases_are_orthonormal() {
        let net = init_network(8, 3, 4, 1).unwrap();
        assert_eq!(net.module_count(), 4);
        for (i, m) in net.modules().iter().enumerate() {
            assert_eq!(m.index, i);
            assert!(m.basis.orthonormality_error() < 1e-10);
        }
    }

    #[test]
    fn init_rejects_bad_shapes() {
        assert!(init_network(2, 3, 1, 0).is_err());
        assert!(init_network(2, 0, 1, 0).is_err());
        assert!(init_network(2, 1, 0, 0).is_err());
    }

    #[test]
    fn winner_by_residual() {
        let net = axis_network();
        assert_eq!(net.find_winner(array![[5.0, 0.1]].view()).unwrap(), 0);
        assert_eq!(net.find_winner(array![[0.0, 3.0]].view()).unwrap(), 1);
        // Equal residuals: lowest index wins.
        assert_eq!(net.find_winner(array![[1.0, 1.0]].view()).unwrap(), 0);
    }

    #[test]
    fn winner_matches_exhaustive_scan() {
        for seed in 0..20 {
            let net = init_network(6, 2, 5, seed).unwrap();
            let episode = random_rows(3, 6, seed);
            let sums: Vec<f64> = net
                .modules()
                .iter()
                .map(|m| {
                    let p = m.basis.projector();
                    episode
                        .rows()
                        .into_iter()
                        .map(|x| {
                            let r = &x - &p.apply(x).unwrap();
                            r.dot(&r)
                        })
                        .sum()
                })
                .collect();
            let mut best = 0;
            for (i, s) in sums.iter().enumerate() {
                if *s < sums[best] {
                    best = i;
                }
            }
            assert_eq!(net.find_winner(episode.view()).unwrap(), best);
        }
    }

    #[test]
    fn kernel_values() {
        let z = array![0.0, 0.0];
        assert_eq!(neighborhood_kernel(z.view(), z.view(), 1.0), 1.0);
        // |d|^2 = 2 sigma^2 with sigma = 1.
        let a = array![1.0, 1.0];
        assert!((neighborhood_kernel(a.view(), z.view(), 1.0) - (-1.0f64).exp()).abs() < 1e-15);
        // |d|^2 = 4 sigma^2 = 1 with sigma = 0.5.
        let b = array![1.0, 0.0];
        let g = neighborhood_kernel(b.view(), z.view(), 0.5);
        assert!((g - 0.135335283236612).abs() < 1e-12);
    }

    #[test]
    fn cost_single_module_cases() {
        let net = AssomNetwork::from_bases(vec![BasisSet::from_orthonormal(array![[1.0, 0.0]]).unwrap()]).unwrap();
        let inside = array![[2.0, 0.0], [-1.0, 0.0]];
        assert_eq!(net.cost(&episodes(inside.view(), 1), 1.0).unwrap(), 0.0);
        let one = array![[3.0, 4.0]];
        assert_eq!(net.cost(&episodes(one.view(), 1), 1.0).unwrap(), 16.0);
    }

    #[test]
    fn cost_matches_term_by_term_oracle() {
        let net = axis_network();
        let data = array![[2.0, 1.0], [0.5, 3.0]];
        let sigma = 1.5;
        // Sample 1: winner 0, recon0 = (2,0), recon1 = (0,1).
        //   module 0: g = 1, residual^2 = 1; module 1: g = exp(-5/4.5), residual^2 = 4.
        // Sample 2: winner 1, recon0 = (0.5,0), recon1 = (0,3).
        //   module 0: g = exp(-9.25/4.5), residual^2 = 9; module 1: g = 1, residual^2 = 0.25.
        let two_s2: f64 = 2.0 * sigma * sigma;
        let expected = 1.0 + (-5.0 / two_s2).exp() * 4.0 + (-9.25 / two_s2).exp() * 9.0 + 0.25;
        let got = net.cost(&episodes(data.view(), 1), sigma).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn gradient_cases() {
        let g = basis_gradient(1.0, array![0.0, 1.0].view(), array![1.0, 0.0].view());
        assert_eq!(g, array![0.0, 0.0]);
        let g = basis_gradient(1.0, array![1.0, 0.0].view(), array![1.0, 0.0].view());
        assert_eq!(g, array![-2.0, 0.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = seeded_rng(17, 0);
        for _ in 0..100 {
            let x: Array1<f64> = Array1::from_shape_fn(5, |_| rng.random_range(-1.0..1.0));
            let raw: Array1<f64> = Array1::from_shape_fn(5, |_| rng.random_range(-1.0..1.0));
            let b = &raw / raw.dot(&raw).sqrt();
            let g: f64 = rng.random_range(0.05..1.0);
            // Residual energy through |x_tilde|^2 = |x|^2 - (x^T b)^2.
            let f = |b: &Array1<f64>| g * (x.dot(&x) - x.dot(b).powi(2));
            let h = 1e-6;
            let fd = Array1::from_shape_fn(5, |j| {
                let mut up = b.clone();
                let mut dn = b.clone();
                up[j] += h;
                dn[j] -= h;
                (f(&up) - f(&dn)) / (2.0 * h)
            });
            let an = basis_gradient(g, x.view(), b.view());
            let diff = &fd - &an;
            let rel = diff.dot(&diff).sqrt() / an.dot(&an).sqrt();
            assert!(rel < 1e-5, "relative error {rel}");
        }
    }

    #[test]
    fn update_cases() {
        let m = AssomModule::new(0, BasisSet::from_orthonormal(array![[1.0, 0.0]]).unwrap());
        assert_eq!(update_module(&m, array![1.0, 1.0].view(), 0.0, 1e-9).unwrap(), array![[1.0, 0.0]]);
        assert_eq!(update_module(&m, array![0.0, 2.0].view(), 0.5, 1e-9).unwrap(), array![[1.0, 0.0]]);
        let got = update_module(&m, array![1.0, 1.0].view(), 0.1, 1e-9).unwrap();
        // Explicit matrix [I + lambda x x^T / (|x_hat||x|)] applied to b.
        let x = array![1.0, 1.0];
        let denom = 1.0 * 2f64.sqrt();
        let mut mat = Array2::<f64>::eye(2);
        for i in 0..2 {
            for j in 0..2 {
                mat[[i, j]] += 0.1 * x[i] * x[j] / denom;
            }
        }
        let expected = mat.dot(&array![1.0, 0.0]);
        assert!((got[[0, 0]] - expected[0]).abs() < 1e-15);
        assert!((got[[0, 1]] - expected[1]).abs() < 1e-15);
        assert!((got[[0, 0]] - 1.070711).abs() < 1e-6 && (got[[0, 1]] - 0.070711).abs() < 1e-6);
    }

    #[test]
    fn dissipate_cases() {
        let now = array![0.5, -0.01, 0.3];
        let prev = array![0.2, 0.4, -0.3];
        assert_eq!(dissipate(now.view(), prev.view(), 0.0), now);
        // eps = alpha |now - prev| = (0.02, 0.02) for the first two entries.
        let out = dissipate(array![0.5, -0.01].view(), array![0.48, 0.01].view(), 1.0);
        assert!((out[0] - 0.48).abs() < 1e-15);
        assert_eq!(out[1], 0.0);
    }

    proptest! {
        #[test]
        fn dissipate_never_grows_or_flips(
            now in proptest::collection::vec(-2.0f64..2.0, 1..10),
            shift in proptest::collection::vec(-2.0f64..2.0, 10),
            alpha in 0.0f64..3.0,
        ) {
            let now = Array1::from(now);
            let prev = Array1::from_shape_fn(now.len(), |i| now[i] + shift[i]);
            let out = dissipate(now.view(), prev.view(), alpha);
            for (o, n) in out.iter().zip(now.iter()) {
                prop_assert!(o.abs() <= n.abs());
                prop_assert!(*o == 0.0 || o.signum() == n.signum());
            }
        }

        #[test]
        fn winner_kernel_is_one(seed in any::<u64>()) {
            let net = init_network(4, 2, 3, seed).unwrap();
            let x = random_rows(1, 4, seed);
            let recon = net.reconstruct_all(x.row(0)).unwrap();
            for r in &recon {
                let g = neighborhood_kernel(recon[0].view(), r.view(), 0.7);
                prop_assert!(g > 0.0 && g <= 1.0);
            }
            prop_assert_eq!(neighborhood_kernel(recon[1].view(), recon[1].view(), 0.7), 1.0);
        }
    }

    #[test]
    fn zero_epochs_is_noop() {
        let mut net = init_network(3, 1, 2, 0).unwrap();
        let before = net.clone();
        let cfg = TrainingConfig { epochs: 0, ..Default::default() };
        let h = net.train(random_rows(10, 3, 0).view(), &cfg).unwrap();
        assert_eq!(net, before);
        assert!(h.cost.is_empty());
    }

    #[test]
    fn train_recovers_noiseless_plane() {
        let mut rng = seeded_rng(3, 2);
        let plane = gram_schmidt(Array2::from_shape_fn((2, 5), |_| rng.random_range(-1.0..1.0)).view()).unwrap();
        let coeffs = Array2::from_shape_fn((200, 2), |_| rng.random_range(-1.0..1.0));
        let data = coeffs.dot(&plane.vectors());
        let mut net = init_network(5, 2, 1, 4).unwrap();
        let cfg = TrainingConfig { epochs: 50, seed: 5, ..Default::default() };
        let history = net.train(data.view(), &cfg).unwrap();
        assert_eq!(history.cost.len(), 50);
        assert!(history.orthonormality_error.iter().all(|&e| e < 1e-8));
        let basis = &net.modules()[0].basis;
        let mean_res: f64 = data
            .rows()
            .into_iter()
            .map(|x| basis.residual_sq(x).unwrap().sqrt())
            .sum::<f64>()
            / 200.0;
        assert!(mean_res < 1e-3, "mean residual {mean_res}");
    }

    #[test]
    fn train_separates_two_subspaces() {
        // Two lines in R^3, labelled by generator.
        let mut rng = seeded_rng(21, 0);
        let dirs = [array![1.0, 0.2, 0.0], array![0.0, 0.3, 1.0]];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            let k = i % 2;
            let t: f64 = rng.random_range(-2.0..2.0);
            let noise = Array1::from_shape_fn(3, |_| rng.random_range(-0.02..0.02));
            rows.push(&dirs[k] * t + noise);
            labels.push(k);
        }
        let data = ndarray::stack(Axis(0), &rows.iter().map(|r| r.view()).collect::<Vec<_>>()).unwrap();
        let mut net = init_network(3, 1, 2, 2).unwrap();
        let cfg = TrainingConfig { epochs: 40, sigma: 0.1, seed: 1, ..Default::default() };
        net.train(data.view(), &cfg).unwrap();
        let mut counts = [[0usize; 2]; 2];
        for (x, &k) in data.rows().into_iter().zip(&labels) {
            let w = net.find_winner(x.insert_axis(Axis(0))).unwrap();
            counts[w][k] += 1;
        }
        for row in counts {
            let total: usize = row.iter().sum();
            assert!(total > 0);
            let purity = *row.iter().max().unwrap() as f64 / total as f64;
            assert!(purity >= 0.9, "purity {purity} counts {counts:?}");
        }
    }

    #[test]
    fn train_is_reproducible() {
        let data = random_rows(60, 4, 1);
        let cfg = TrainingConfig { epochs: 5, seed: 99, episode_size: 3, ..Default::default() };
        let (a, ha) = train(init_network(4, 2, 3, 1).unwrap(), data.view(), &cfg).unwrap();
        let (b, hb) = train(init_network(4, 2, 3, 1).unwrap(), data.view(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
    }

    #[test]
    fn train_rejects_bad_input() {
        let mut net = init_network(3, 1, 1, 0).unwrap();
        assert!(matches!(
            net.train(random_rows(4, 2, 0).view(), &TrainingConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut data = random_rows(4, 3, 0);
        data[[2, 1]] = f64::NAN;
        assert!(matches!(net.train(data.view(), &TrainingConfig::default()), Err(Error::NonFinite { row: 2, column: 1, .. })));
        let cfg = TrainingConfig { sigma: 0.0, ..Default::default() };
        assert!(matches!(net.train(random_rows(4, 3, 0).view(), &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn eta_schedule() {
        let cfg = TrainingConfig { epochs: 11, eta_start: 0.1, eta_end: 0.0, ..Default::default() };
        assert!((cfg.eta(5) - 0.05).abs() < 1e-15);
        assert_eq!(cfg.eta(0), 0.1);
        let single = TrainingConfig { epochs: 1, ..Default::default() };
        assert_eq!(single.eta(0), single.eta_start);
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let mut net = init_network(4, 2, 3, 8).unwrap();
        net.train(random_rows(30, 4, 2).view(), &TrainingConfig { epochs: 3, ..Default::default() })
            .unwrap();
        let text = net.to_json();
        let back = AssomNetwork::from_json(&text).unwrap();
        for (a, b) in net.modules().iter().zip(back.modules()) {
            assert_eq!(a.basis, b.basis);
        }
        assert_eq!(back.to_json(), text);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["version"], 1);
        assert_eq!(v["D"], 4);
        assert_eq!(v["H"], 2);
        assert_eq!(v["N"], 3);
    }

    #[test]
    fn json_rejects_bad_documents() {
        let bad_version = r#"{"version":2,"D":2,"H":1,"N":1,"modules":[{"index":0,"basis":[[1.0,0.0]]}]}"#;
        assert!(AssomNetwork::from_json(bad_version).is_err());
        let not_unit = r#"{"version":1,"D":2,"H":1,"N":1,"modules":[{"index":0,"basis":[[2.0,0.0]]}]}"#;
        assert!(matches!(AssomNetwork::from_json(not_unit), Err(Error::NotOrthonormal { .. })));
        let wrong_n = r#"{"version":1,"D":2,"H":1,"N":2,"modules":[{"index":0,"basis":[[1.0,0.0]]}]}"#;
        assert!(AssomNetwork::from_json(wrong_n).is_err());
    }
}
