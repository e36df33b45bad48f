//! Hermite-function representation of velocity space.
//!
//! A velocity profile `h(v) = f(v)/sqrt(M(v))` is stored as coefficients in
//! the orthonormal Hermite functions
//!
//! ```text
//! psi_n(v) = He_n(v) / sqrt(n!) * sqrt(M(v)),      psi_0 = sqrt(M)
//! ```
//!
//! where `He_n` are the probabilists' Hermite polynomials. In this basis the
//! linearized Fokker-Planck operator is diagonal with eigenvalue equal to the
//! total degree, the macroscopic moments `a = <g, sqrt M>` and
//! `b_i = <g, v_i sqrt M>` are single coefficients, and multiplication by `v`
//! or differentiation in `v` are three-term (ladder) recurrences.
//!
//! For `dv > 1` the basis is the tensor product of the one-dimensional one,
//! flattened with axis 0 varying fastest.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Result, SimError};

/// Largest supported velocity dimension.
pub const MAX_DV: usize = 3;

/// Ladder realizations acting along one velocity axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    /// Multiplication by `v_i`.
    MultiplyV,
    /// Differentiation `d/dv_i`.
    DDv,
    /// The drift `(d/dv_i - v_i/2)`, i.e. `h -> M^{-1/2} d/dv_i (M^{1/2} h)`.
    Drift,
}

/// Coefficients of a single velocity profile in the Hermite-function basis.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteCoeffs {
    pub c: Vec<f64>,
}

impl HermiteCoeffs {
    pub fn zeros(len: usize) -> Self {
        Self { c: vec![0.0; len] }
    }

    /// Unit vector `e_idx` (flat index).
    pub fn unit(len: usize, idx: usize) -> Self {
        let mut c = vec![0.0; len];
        c[idx] = 1.0;
        Self { c }
    }

    pub fn from_vec(c: Vec<f64>) -> Self {
        Self { c }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        dot(&self.c, &other.c)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.c, &self.c)
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|x| x.is_finite())
    }
}

/// Macro/micro split of a velocity profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Density moment `a`.
    pub a: f64,
    /// Momentum moments `b_i`, one per velocity axis.
    pub b: Vec<f64>,
    /// `(I - P) g`: the input with degree-0 and degree-1 entries zeroed.
    pub micro: HermiteCoeffs,
}

/// Pieces of the coercivity quotient `<L g, g> / (|(I-P)g|_nu^2 + |b|^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityReport {
    pub ratio: f64,
    pub numerator: f64,
    pub micro_nu_sq: f64,
    pub b_sq: f64,
}

/// Immutable Hermite basis with its Gauss-Hermite quadrature.
#[derive(Debug, Clone)]
pub struct VelocityBasis {
    dv: usize,
    modes: usize,
    len: usize,
    /// One-dimensional Gauss-Hermite abscissae for the weight `M(v)`.
    nodes: Vec<f64>,
    /// Matching weights, summing to one.
    weights: Vec<f64>,
    /// `sqrt(n + 1)`.
    ladder_up: Vec<f64>,
    /// `sqrt(n)`.
    ladder_down: Vec<f64>,
    /// Total degree `|alpha|` of each flat index.
    degree: Vec<usize>,
    /// `He_n(v_k)/sqrt(n!)` laid out as `[k * modes + n]`.
    poly_at_nodes: Vec<f64>,
}

impl VelocityBasis {
    /// Builds the basis for velocity dimension `dv` with `modes` Hermite
    /// functions per axis. Requires `modes >= 3`.
    pub fn new(dv: usize, modes: usize) -> Result<Self> {
        if !(1..=MAX_DV).contains(&dv) {
            return Err(SimError::Config(format!(
                "velocity dimension must be 1, 2 or 3 (got {dv})"
            )));
        }
        if modes < 3 {
            return Err(SimError::Config(format!(
                "Hermite mode count must be >= 3 (got {modes})"
            )));
        }
        let (nodes, weights) = gauss_hermite(modes);
        let len = modes.pow(dv as u32);
        let degree = (0..len)
            .map(|idx| multi_index(idx, modes, dv).iter().sum())
            .collect();
        let mut poly_at_nodes = vec![0.0; modes * modes];
        for (k, &v) in nodes.iter().enumerate() {
            normalized_hermite(v, &mut poly_at_nodes[k * modes..(k + 1) * modes]);
        }
        Ok(Self {
            dv,
            modes,
            len,
            nodes,
            weights,
            ladder_up: (0..modes).map(|n| ((n + 1) as f64).sqrt()).collect(),
            ladder_down: (0..modes).map(|n| (n as f64).sqrt()).collect(),
            degree,
            poly_at_nodes,
        })
    }

    pub fn dv(&self) -> usize {
        self.dv
    }

    /// Modes per axis.
    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Total number of coefficients (`modes^dv`).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ladder_up(&self) -> &[f64] {
        &self.ladder_up
    }

    pub fn ladder_down(&self) -> &[f64] {
        &self.ladder_down
    }

    pub fn degree(&self, idx: usize) -> usize {
        self.degree[idx]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degree
    }

    /// Flat index of the multi-index `alpha` (entries beyond `dv` ignored).
    pub fn flat_index(&self, alpha: &[usize]) -> usize {
        flat_index(alpha, self.modes, self.dv)
    }

    pub fn multi_index(&self, idx: usize) -> [usize; MAX_DV] {
        multi_index(idx, self.modes, self.dv)
    }

    /// Flat index of `e_i`, the degree-one function `v_i sqrt(M)`.
    pub fn axis_index(&self, axis: usize) -> usize {
        self.modes.pow(axis as u32)
    }

    /// Number of tensor-product quadrature points.
    pub fn quadrature_len(&self) -> usize {
        self.len
    }

    /// Velocity coordinates of tensor quadrature point `k`.
    pub fn quadrature_point(&self, k: usize) -> [f64; MAX_DV] {
        let ks = multi_index(k, self.modes, self.dv);
        let mut v = [0.0; MAX_DV];
        for d in 0..self.dv {
            v[d] = self.nodes[ks[d]];
        }
        v
    }

    /// Tensor quadrature weight of point `k` (for the weight `M(v)`).
    pub fn quadrature_weight(&self, k: usize) -> f64 {
        let ks = multi_index(k, self.modes, self.dv);
        (0..self.dv).map(|d| self.weights[ks[d]]).product()
    }

    /// `He_alpha(v_k)/sqrt(alpha!)` at tensor quadrature point `k`.
    fn poly_tensor(&self, k: usize, idx: usize) -> f64 {
        let ks = multi_index(k, self.modes, self.dv);
        let al = multi_index(idx, self.modes, self.dv);
        (0..self.dv)
            .map(|d| self.poly_at_nodes[ks[d] * self.modes + al[d]])
            .product()
    }

    /// Global normalized Maxwellian `(2 pi)^{-dv/2} exp(-|v|^2/2)`.
    pub fn maxwellian(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.dv, "velocity point has wrong dimension");
        let v2: f64 = v.iter().map(|x| x * x).sum();
        (2.0 * PI).powf(-(self.dv as f64) / 2.0) * (-0.5 * v2).exp()
    }

    /// Quadrature inner products `<h, psi_alpha>` from samples of `h` at the
    /// tensor quadrature points.
    pub fn analyze(&self, samples: &[f64]) -> Result<HermiteCoeffs> {
        if samples.len() != self.quadrature_len() {
            return Err(SimError::Shape {
                what: "velocity samples",
                expected: self.quadrature_len(),
                got: samples.len(),
            });
        }
        let mut c = vec![0.0; self.len];
        for (k, &s) in samples.iter().enumerate() {
            let v = self.quadrature_point(k);
            // <h, psi_a> = int (h / sqrt M) (He_a/sqrt(a!)) M dv
            let w = self.quadrature_weight(k) * s / self.maxwellian(&v[..self.dv]).sqrt();
            for (idx, ci) in c.iter_mut().enumerate() {
                *ci += w * self.poly_tensor(k, idx);
            }
        }
        Ok(HermiteCoeffs { c })
    }

    /// Evaluates `h(v) = sum_alpha c_alpha psi_alpha(v)` at an arbitrary point.
    pub fn synthesize(&self, coeffs: &HermiteCoeffs, v: &[f64]) -> Result<f64> {
        self.check_len(coeffs)?;
        if v.len() != self.dv {
            return Err(SimError::Shape {
                what: "velocity point",
                expected: self.dv,
                got: v.len(),
            });
        }
        let mut per_axis = vec![0.0; self.dv * self.modes];
        for d in 0..self.dv {
            normalized_hermite(v[d], &mut per_axis[d * self.modes..(d + 1) * self.modes]);
        }
        let sqrt_m = self.maxwellian(v).sqrt();
        let mut acc = 0.0;
        for (idx, &ci) in coeffs.c.iter().enumerate() {
            if ci == 0.0 {
                continue;
            }
            let al = multi_index(idx, self.modes, self.dv);
            let p: f64 = (0..self.dv).map(|d| per_axis[d * self.modes + al[d]]).product();
            acc += ci * p;
        }
        Ok(acc * sqrt_m)
    }

    /// Values of `psi_n` (dv = 1) at the quadrature nodes, as `[k * modes + n]`.
    pub fn psi_at_nodes(&self) -> Vec<f64> {
        let mut out = self.poly_at_nodes.clone();
        for (k, &v) in self.nodes.iter().enumerate() {
            let s = self.maxwellian_1d(v).sqrt();
            for n in 0..self.modes {
                out[k * self.modes + n] *= s;
            }
        }
        out
    }

    fn maxwellian_1d(&self, v: f64) -> f64 {
        (2.0 * PI).powf(-0.5) * (-0.5 * v * v).exp()
    }

    /// Linearized Fokker-Planck operator: `(L h)_alpha = |alpha| h_alpha`.
    pub fn apply_l(&self, coeffs: &HermiteCoeffs) -> HermiteCoeffs {
        HermiteCoeffs {
            c: coeffs
                .c
                .iter()
                .zip(&self.degree)
                .map(|(c, &d)| d as f64 * c)
                .collect(),
        }
    }

    /// Splits `g` into `a`, `b` and the micro part `(I - P) g`.
    pub fn decompose(&self, coeffs: &HermiteCoeffs) -> Decomposition {
        let a = coeffs.c[0];
        let b = (0..self.dv).map(|i| coeffs.c[self.axis_index(i)]).collect();
        let mut micro = coeffs.clone();
        for (ci, &d) in micro.c.iter_mut().zip(&self.degree) {
            if d <= 1 {
                *ci = 0.0;
            }
        }
        Decomposition { a, b, micro }
    }

    /// `(I - P) g` alone.
    pub fn micro(&self, coeffs: &HermiteCoeffs) -> HermiteCoeffs {
        self.decompose(coeffs).micro
    }

    /// Ladder operator along `axis`, truncated to the basis (shift-up out of
    /// the top mode is dropped).
    pub fn apply_ladder(&self, coeffs: &HermiteCoeffs, kind: Ladder, axis: usize) -> Result<HermiteCoeffs> {
        self.check_len(coeffs)?;
        if axis >= self.dv {
            return Err(SimError::Config(format!(
                "ladder axis {axis} out of range for dv = {}",
                self.dv
            )));
        }
        let mut out = vec![0.0; self.len];
        ladder_into(&coeffs.c, &mut out, self.modes, self.dv, axis, kind);
        Ok(HermiteCoeffs { c: out })
    }

    /// `int |grad_v h|^2 + (1 + |v|^2) |h|^2 dv`, evaluated without truncation.
    pub fn nu_norm_sq(&self, coeffs: &HermiteCoeffs) -> f64 {
        nu_norm_sq_slice(&coeffs.c, self.modes, self.dv)
    }

    /// `Gamma_ij(g) = int g (v_i v_j - 1) sqrt(M) dv` (0-based axes).
    pub fn gamma_moment(&self, coeffs: &HermiteCoeffs, i: usize, j: usize) -> Result<f64> {
        self.check_len(coeffs)?;
        if i >= self.dv || j >= self.dv {
            return Err(SimError::Config(format!(
                "moment indices ({i}, {j}) out of range for dv = {}",
                self.dv
            )));
        }
        Ok(gamma_from_coeffs(&coeffs.c, self.modes, self.dv, i, j))
    }

    /// Coercivity quotient of `L` against the micro nu-norm plus `|b|^2`.
    pub fn coercivity_ratio(&self, coeffs: &HermiteCoeffs) -> Result<CoercivityReport> {
        self.check_len(coeffs)?;
        let in_kernel = coeffs
            .c
            .iter()
            .zip(&self.degree)
            .all(|(c, &d)| d == 0 || *c == 0.0);
        if in_kernel {
            return Err(SimError::Domain(
                "coercivity ratio is undefined on Ker L = span{sqrt(M)}".into(),
            ));
        }
        let numerator = self.apply_l(coeffs).dot(coeffs);
        let dec = self.decompose(coeffs);
        let micro_nu_sq = self.nu_norm_sq(&dec.micro);
        let b_sq: f64 = dec.b.iter().map(|b| b * b).sum();
        Ok(CoercivityReport {
            ratio: numerator / (micro_nu_sq + b_sq),
            numerator,
            micro_nu_sq,
            b_sq,
        })
    }

    fn check_len(&self, coeffs: &HermiteCoeffs) -> Result<()> {
        if coeffs.len() != self.len {
            return Err(SimError::Shape {
                what: "Hermite coefficients",
                expected: self.len,
                got: coeffs.len(),
            });
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn flat_index(alpha: &[usize], modes: usize, dv: usize) -> usize {
    let mut idx = 0;
    let mut stride = 1;
    for &a in alpha.iter().take(dv) {
        idx += a * stride;
        stride *= modes;
    }
    idx
}

pub fn multi_index(mut idx: usize, modes: usize, dv: usize) -> [usize; MAX_DV] {
    let mut out = [0; MAX_DV];
    for o in out.iter_mut().take(dv) {
        *o = idx % modes;
        idx /= modes;
    }
    out
}

/// Fills `out[n] = He_n(v)/sqrt(n!)` for `n < out.len()`.
pub fn normalized_hermite(v: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = v;
    }
    for n in 1..out.len() - 1 {
        let nf = n as f64;
        out[n + 1] = (v * out[n] - nf.sqrt() * out[n - 1]) / (nf + 1.0).sqrt();
    }
}

/// Gauss-Hermite rule for the weight `M(v)` (probabilists' convention):
/// Golub-Welsch for the initial nodes, one Newton polish, then Christoffel
/// weights `1 / sum_n p_n(x_k)^2`.
fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let off = (i as f64).sqrt();
        jacobi[(i - 1, i)] = off;
        jacobi[(i, i - 1)] = off;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut p = vec![0.0; n + 1];
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            normalized_hermite(*x, &mut p);
            // p_n' = sqrt(n) p_{n-1}
            let dp = (n as f64).sqrt() * p[n - 1];
            if dp == 0.0 {
                break;
            }
            let step = p[n] / dp;
            *x -= step;
            if step.abs() < 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }
    // Symmetrize so odd moments vanish to round-off.
    for i in 0..n / 2 {
        let m = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -m;
        nodes[n - 1 - i] = m;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            normalized_hermite(x, &mut p[..n]);
            1.0 / p[..n].iter().map(|q| q * q).sum::<f64>()
        })
        .collect();
    (nodes, weights)
}

/// Truncated ladder action along `axis`, written into `dst`.
pub fn ladder_into(src: &[f64], dst: &mut [f64], modes: usize, dv: usize, axis: usize, kind: Ladder) {
    debug_assert!(axis < dv && src.len() == modes.pow(dv as u32));
    let stride = modes.pow(axis as u32);
    for (idx, out) in dst.iter_mut().enumerate() {
        let n = (idx / stride) % modes;
        let down = if n >= 1 { src[idx - stride] } else { 0.0 };
        let up = if n + 1 < modes { src[idx + stride] } else { 0.0 };
        let sn = (n as f64).sqrt();
        let sn1 = ((n + 1) as f64).sqrt();
        *out = match kind {
            Ladder::MultiplyV => sn * down + sn1 * up,
            Ladder::DDv => 0.5 * sn1 * up - 0.5 * sn * down,
            Ladder::Drift => -sn * down,
        };
    }
}

/// Embeds coefficients with `modes` per axis into `modes + extra` per axis.
pub fn pad_modes(c: &[f64], modes: usize, dv: usize, extra: usize) -> Vec<f64> {
    let big = modes + extra;
    let mut out = vec![0.0; big.pow(dv as u32)];
    for (idx, &ci) in c.iter().enumerate() {
        let al = multi_index(idx, modes, dv);
        out[flat_index(&al, big, dv)] = ci;
    }
    out
}

/// Exact `d/dv_axis` of a profile: the result lives on `modes + 1` per axis.
pub fn ddv_exact(c: &[f64], modes: usize, dv: usize, axis: usize) -> (Vec<f64>, usize) {
    let padded = pad_modes(c, modes, dv, 1);
    let mut out = vec![0.0; padded.len()];
    ladder_into(&padded, &mut out, modes + 1, dv, axis, Ladder::DDv);
    (out, modes + 1)
}

/// Untruncated nu-norm squared of a coefficient vector.
pub fn nu_norm_sq_slice(c: &[f64], modes: usize, dv: usize) -> f64 {
    let padded = pad_modes(c, modes, dv, 1);
    let big = modes + 1;
    let mut scratch = vec![0.0; padded.len()];
    let mut total = dot(&padded, &padded);
    for axis in 0..dv {
        ladder_into(&padded, &mut scratch, big, dv, axis, Ladder::DDv);
        total += dot(&scratch, &scratch);
        ladder_into(&padded, &mut scratch, big, dv, axis, Ladder::MultiplyV);
        total += dot(&scratch, &scratch);
    }
    total
}

/// `int g (v_i v_j - 1) sqrt(M) dv` from coefficients.
pub fn gamma_from_coeffs(c: &[f64], modes: usize, dv: usize, i: usize, j: usize) -> f64 {
    let mut alpha = [0usize; MAX_DV];
    if i == j {
        // v^2 - 1 = sqrt(2) He_2 / sqrt(2!)
        alpha[i] = 2;
        std::f64::consts::SQRT_2 * c[flat_index(&alpha, modes, dv)]
    } else {
        alpha[i] = 1;
        alpha[j] = 1;
        c[flat_index(&alpha, modes, dv)] - c[0]
    }
}
