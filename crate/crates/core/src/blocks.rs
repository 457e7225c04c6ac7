//! Exact block reduction for models whose charger is a dephased two-level
//! system.
//!
//! Write the Hamiltonian in charger blocks, H = [[A, B], [B^dag, C]], with
//! the jump operator the excited-state projector. When B is invertible the
//! eigenvectors v_k of B^dag B and u_k = B v_k / sqrt(lambda_k) pair up into
//! subspaces span{(u_k, 0), (0, v_k)}. Those left invariant by A and C
//! (merged into connected groups otherwise) reduce both H and the jump
//! operator. The master equation then splits into independent small
//! problems, one per pair of blocks.

use std::ops::Range;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::expm::expm;
use crate::metrics::ChargingReport;
use crate::models::{ModelSpec, Params};
use crate::opalg::{ComplexMatrix, C64};

/// Relative tolerance for couplings and eigenvalue clusters.
const COUPLING_TOL: f64 = 1e-10;
/// Eigenvalues of B^dag B below this fraction of the largest mark nearly
/// dark modes.
const NEAR_DARK: f64 = 1e-8;
/// Groups larger than this make the reduction pointless.
pub const MAX_GROUP: usize = 8;

#[derive(Clone, Debug)]
pub struct BlockDecomposition {
    /// Unitary; columns ordered block by block.
    pub basis: ComplexMatrix,
    pub blocks: Vec<Range<usize>>,
    /// Hamiltonian restricted to each block.
    pub h: Vec<DMatrix<C64>>,
    /// Diagonal of the jump operator in each block.
    pub l: Vec<Vec<f64>>,
    pub gamma: f64,
    min_coupling: f64,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut i = i;
        while self.0[i] != r {
            let next = self.0[i];
            self.0[i] = r;
            i = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn sub(m: &ComplexMatrix, rows: Range<usize>, cols: Range<usize>) -> ComplexMatrix {
    let n = rows.len();
    assert_eq!(n, cols.len());
    ComplexMatrix::from_fn(n, |i, j| m[(rows.start + i, cols.start + j)])
}

impl BlockDecomposition {
    pub fn new(model: &ModelSpec) -> Result<Self> {
        if model.charger_dim() != 2 {
            return Err(Error::Incompatible("block reduction needs a two-level charger".into()));
        }
        let d = model.battery_dim();
        let dim = 2 * d;
        let jump_ok = (0..dim).all(|i| {
            (0..dim).all(|j| {
                let want = if i == j && i < d { 1.0 } else { 0.0 };
                (model.jump[(i, j)] - C64::new(want, 0.0)).norm() < 1e-12
            })
        });
        if !jump_ok {
            return Err(Error::Incompatible(
                "block reduction needs the charger excited-state projector as jump operator".into(),
            ));
        }
        let h = &model.hamiltonian;
        let scale = h.max_abs().max(1.0);
        let a = sub(h, 0..d, 0..d);
        let b = sub(h, 0..d, d..dim);
        let c = sub(h, d..dim, d..dim);

        let k1 = b.dagger().matmul(&b);
        let eig = crate::opalg::herm_eig(&k1)?;
        let lam = &eig.eigenvalues;
        let lmax = lam.last().copied().unwrap_or(0.0);
        if !(lmax > 0.0) {
            return Err(invalid("F", "block reduction needs a nonzero charger coupling"));
        }
        let v = &eig.eigenvectors;
        let bv = b.matmul(v);
        // B v_k / sqrt(lambda_k) loses all accuracy for nearly dark modes;
        // those partners are taken from B B^dag, which shares the spectrum
        let near_dark = |k: usize| lam[k] < NEAR_DARK * lmax;
        let mut u = ComplexMatrix::from_fn(d, |i, k| bv[(i, k)] / lam[k].sqrt());
        if (0..d).any(near_dark) {
            let eig_e = crate::opalg::herm_eig(&b.matmul(&b.dagger()))?;
            for k in (0..d).filter(|&k| near_dark(k)) {
                for i in 0..d {
                    u[(i, k)] = eig_e.eigenvectors[(i, k)];
                }
            }
        }

        let mut uf = UnionFind((0..d).collect());
        for k in 1..d {
            if lam[k] - lam[k - 1] <= 1e-9 * lmax.max(1.0) {
                uf.union(k - 1, k);
            }
        }
        let ca = u.dagger().matmul(&a).matmul(&u);
        let cc = v.dagger().matmul(&c).matmul(v);
        for i in 0..d {
            for j in (i + 1)..d {
                if ca[(i, j)].norm() > COUPLING_TOL * scale || cc[(i, j)].norm() > COUPLING_TOL * scale {
                    uf.union(i, j);
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut root_of = vec![usize::MAX; d];
        for k in 0..d {
            let r = uf.find(k);
            if root_of[r] == usize::MAX {
                root_of[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[root_of[r]].push(k);
        }
        if let Some(big) = groups.iter().map(Vec::len).max().filter(|&m| m > MAX_GROUP) {
            return Err(Error::Incompatible(format!(
                "block reduction found a coupled group of size {big}"
            )));
        }

        let mut cols: Vec<Vec<C64>> = Vec::with_capacity(dim);
        let mut blocks = Vec::with_capacity(groups.len());
        let mut l = Vec::with_capacity(groups.len());
        for grp in &groups {
            let start = cols.len();
            for &k in grp {
                let mut col = vec![C64::new(0.0, 0.0); dim];
                for i in 0..d {
                    col[i] = u[(i, k)];
                }
                cols.push(col);
            }
            for &k in grp {
                let mut col = vec![C64::new(0.0, 0.0); dim];
                for i in 0..d {
                    col[d + i] = v[(i, k)];
                }
                cols.push(col);
            }
            let m = grp.len();
            blocks.push(start..cols.len());
            l.push((0..2 * m).map(|i| if i < m { 1.0 } else { 0.0 }).collect());
        }
        let basis = ComplexMatrix::from_fn(dim, |i, j| cols[j][i]);
        let hr = basis.dagger().matmul(h).matmul(&basis);

        // the reduced Hamiltonian must not couple different blocks
        let mut owner = vec![0usize; dim];
        for (k, r) in blocks.iter().enumerate() {
            for i in r.clone() {
                owner[i] = k;
            }
        }
        let leak = (0..dim)
            .flat_map(|i| (0..dim).map(move |j| (i, j)))
            .filter(|&(i, j)| owner[i] != owner[j])
            .map(|(i, j)| hr[(i, j)].norm())
            .fold(0.0, f64::max);
        if leak > 1e-8 * scale {
            return Err(Error::Incompatible(format!(
                "block reduction left inter-block couplings of {leak:.2e}"
            )));
        }
        let hb = blocks
            .iter()
            .map(|r| DMatrix::from_fn(r.len(), r.len(), |i, j| hr[(r.start + i, r.start + j)]))
            .collect();
        Ok(Self {
            basis,
            blocks,
            h: hb,
            l,
            gamma: model.params.gamma_c,
            min_coupling: lam[0].max(0.0).sqrt(),
        })
    }

    /// Smallest coupling sqrt(lambda) between the charger sectors. For an
    /// oscillator battery it vanishes as the cutoff grows, leaving a dark
    /// state; a sizable value flags a truncation artifact.
    pub fn min_coupling(&self) -> f64 {
        self.min_coupling
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Gershgorin bound on the spectral radius of block `c`.
    fn h_radius(&self, c: usize) -> f64 {
        self.h[c]
            .row_iter()
            .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// W^dag X W.
    pub fn to_blocks(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.basis.dagger().matmul(x).matmul(&self.basis)
    }

    /// W X W^dag.
    pub fn from_blocks(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.basis.matmul(x).matmul(&self.basis.dagger())
    }

    /// Generator of the (c, d) block of rho, acting on its row-major vectorization.
    fn pair_generator(&self, c: usize, d: usize) -> DMatrix<C64> {
        let (hc, hd) = (&self.h[c], &self.h[d]);
        let (lc, ld) = (&self.l[c], &self.l[d]);
        let (a, b) = (hc.nrows(), hd.nrows());
        let mi = C64::new(0.0, -1.0);
        let mut g = DMatrix::from_element(a * b, a * b, C64::new(0.0, 0.0));
        for p in 0..a {
            for q in 0..b {
                let row = p * b + q;
                for r in 0..a {
                    g[(row, r * b + q)] += mi * hc[(p, r)];
                }
                for r in 0..b {
                    g[(row, p * b + r)] -= mi * hd[(r, q)];
                }
                g[(row, row)] -= C64::new(0.5 * self.gamma * (lc[p] - ld[q]).powi(2), 0.0);
            }
        }
        g
    }
}

struct Pair {
    weight: f64,
    /// Largest |x0| |obs| entry product.
    amp: f64,
    /// Largest frequency among the generator's underdamped modes.
    freq: f64,
    x0: Vec<C64>,
    obs: Vec<C64>,
    gen: DMatrix<C64>,
}

/// Expectation value of a fixed observable along the reduced evolution.
pub struct BlockEvolver {
    decomp: BlockDecomposition,
    pairs: Vec<Pair>,
}

/// Pairs whose initial block times observable block is below this are dropped.
const PRUNE_TOL: f64 = 1e-16;

fn dot(obs: &[C64], x: &[C64]) -> C64 {
    obs.iter().zip(x).map(|(o, v)| o * v).sum()
}

fn matvec(m: &DMatrix<C64>, x: &[C64]) -> Vec<C64> {
    let n = x.len();
    (0..n).map(|i| (0..n).map(|j| m[(i, j)] * x[j]).sum()).collect()
}

impl BlockEvolver {
    pub fn new(decomp: BlockDecomposition, rho0: &ComplexMatrix, observable: &ComplexMatrix) -> Result<Self> {
        let dim = decomp.basis.dim();
        if rho0.dim() != dim || observable.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                found: rho0.dim(),
            });
        }
        let r = decomp.to_blocks(rho0);
        let o = decomp.to_blocks(observable);
        let nb = decomp.n_blocks();
        let mut pairs = Vec::new();
        for c in 0..nb {
            for d in c..nb {
                let (rc, rd) = (decomp.blocks[c].clone(), decomp.blocks[d].clone());
                let mut x0 = Vec::with_capacity(rc.len() * rd.len());
                let mut obs = Vec::with_capacity(rc.len() * rd.len());
                for p in rc.clone() {
                    for q in rd.clone() {
                        x0.push(r[(p, q)]);
                        // Tr[rho O] = sum_pq rho_pq O_qp
                        obs.push(o[(q, p)]);
                    }
                }
                let xm = x0.iter().fold(0.0f64, |m, z| m.max(z.norm()));
                let om = obs.iter().fold(0.0f64, |m, z| m.max(z.norm()));
                if xm * om <= PRUNE_TOL {
                    continue;
                }
                let gen = decomp.pair_generator(c, d);
                let freq = underdamped_frequency(&gen).unwrap_or_else(|| decomp.h_radius(c) + decomp.h_radius(d));
                let weight = if c == d { 1.0 } else { 2.0 };
                pairs.push(Pair {
                    weight,
                    amp: xm * om,
                    freq,
                    x0,
                    obs,
                    gen,
                });
            }
        }
        Ok(Self { decomp, pairs })
    }

    pub fn decomposition(&self) -> &BlockDecomposition {
        &self.decomp
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// Largest underdamped frequency among pairs whose contribution can
    /// reach `min_amp`.
    pub fn significant_frequency(&self, min_amp: f64) -> f64 {
        self.pairs
            .iter()
            .filter(|p| p.weight * p.amp * p.x0.len() as f64 >= min_amp)
            .fold(0.0f64, |m, p| m.max(p.freq))
    }

    /// Value at t = 0.
    pub fn initial(&self) -> f64 {
        self.pairs.iter().map(|p| p.weight * dot(&p.obs, &p.x0).re).sum()
    }

    /// Value at a single time.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        let parts: Vec<Result<f64>> = self
            .pairs
            .par_iter()
            .map(|p| {
                let prop = expm(&(&p.gen * C64::new(t, 0.0)))?;
                Ok(p.weight * dot(&p.obs, &matvec(&prop, &p.x0)).re)
            })
            .collect();
        parts.into_iter().sum()
    }

    /// Values at k * step for k = 0..=n_steps.
    pub fn values_uniform(&self, step: f64, n_steps: usize) -> Result<Vec<f64>> {
        let parts: Vec<Result<Vec<f64>>> = self
            .pairs
            .par_chunks(64)
            .map(|chunk| {
                let mut acc = vec![0.0; n_steps + 1];
                for p in chunk {
                    let prop = expm(&(&p.gen * C64::new(step, 0.0)))?;
                    let mut x = p.x0.clone();
                    acc[0] += p.weight * dot(&p.obs, &x).re;
                    for a in acc.iter_mut().skip(1) {
                        x = matvec(&prop, &x);
                        *a += p.weight * dot(&p.obs, &x).re;
                    }
                }
                Ok(acc)
            })
            .collect();
        let mut out = vec![0.0; n_steps + 1];
        for part in parts {
            for (o, v) in out.iter_mut().zip(part?) {
                *o += v;
            }
        }
        Ok(out)
    }

    /// Long-time limit: each block relaxes onto the kernel of its
    /// generator, which is orthogonal to the decaying modes.
    pub fn steady_value(&self) -> Result<f64> {
        if !(self.decomp.gamma > 0.0) {
            return Err(invalid("gamma_C", "the long-time limit needs gamma_C > 0"));
        }
        let mut total = 0.0;
        for p in &self.pairs {
            let x = kernel_projection(&p.gen, &p.x0);
            total += p.weight * dot(&p.obs, &x).re;
        }
        Ok(total)
    }

    /// Long-time state in the original basis.
    pub fn steady_state(&self, rho0: &ComplexMatrix) -> Result<ComplexMatrix> {
        if !(self.decomp.gamma > 0.0) {
            return Err(invalid("gamma_C", "the long-time limit needs gamma_C > 0"));
        }
        let r = self.decomp.to_blocks(rho0);
        let dim = r.dim();
        let mut out = ComplexMatrix::zeros(dim);
        let nb = self.decomp.n_blocks();
        for c in 0..nb {
            for d in 0..nb {
                let (rc, rd) = (self.decomp.blocks[c].clone(), self.decomp.blocks[d].clone());
                let x0: Vec<C64> = rc.clone().flat_map(|p| rd.clone().map(move |q| (p, q))).map(|(p, q)| r[(p, q)]).collect();
                if x0.iter().all(|z| z.norm() == 0.0) {
                    continue;
                }
                let x = kernel_projection(&self.decomp.pair_generator(c, d), &x0);
                let b = rd.len();
                for (k, z) in x.into_iter().enumerate() {
                    out[(rc.start + k / b, rd.start + k % b)] = z;
                }
            }
        }
        Ok(self.decomp.from_blocks(&out))
    }
}

/// Largest |Im| among eigenvalues with |Re| <= |Im|, from the real Schur
/// form of the real representation [[A, -B], [B, A]] of g = A + iB, whose
/// spectrum is that of g together with its conjugate.
fn underdamped_frequency(g: &DMatrix<C64>) -> Option<f64> {
    let n = g.nrows();
    let real = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = g[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let ev = nalgebra::Schur::try_new(real, f64::EPSILON, 10_000)?.complex_eigenvalues();
    // modes that die within a period do not need resolving
    Some(
        ev.iter()
            .filter(|z| z.re.abs() <= z.im.abs())
            .fold(0.0f64, |m, z| m.max(z.im.abs())),
    )
}

/// Orthogonal projection of x onto the null space of g.
fn kernel_projection(g: &DMatrix<C64>, x: &[C64]) -> Vec<C64> {
    let n = x.len();
    let svd = g.clone().svd(false, true);
    let vt = svd.v_t.expect("requested");
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= 1e-10 * smax.max(1e-300) {
            // row k of V^dag is the conjugate of a null vector
            let coef: C64 = (0..n).map(|j| vt[(k, j)] * x[j]).sum();
            for j in 0..n {
                out[j] += vt[(k, j)].conj() * coef;
            }
        }
    }
    out
}

/// Pairs contributing less than this fraction of the threshold do not set
/// the scan step; the crossing itself is refined on the full sum.
const SIGNIFICANT_AMPLITUDE: f64 = 1e-3;
/// Samples across the scanned window when nothing oscillates.
const MIN_SCAN_SAMPLES: f64 = 4000.0;
/// Samples per fastest period in the charging-time scan.
const SCAN_SAMPLES_PER_PERIOD: f64 = 16.0;
/// Horizon doublings before giving up.
const MAX_DOUBLINGS: usize = 14;

/// Last-root charging time of the battery energy, evaluated on the reduced
/// dynamics. The scan horizon doubles until the deviation over its second
/// half stays below half the threshold; the last crossing is bisected on
/// the exact propagator.
pub fn block_charging_time(model: &ModelSpec, n: u32) -> Result<(ChargingReport, BlockEvolver)> {
    if !(model.params.gamma_c > 0.0) {
        return Err(Error::NotConverged { horizon: f64::INFINITY });
    }
    let decomp = BlockDecomposition::new(model)?;
    let ev = BlockEvolver::new(decomp, &model.ground_state(), &model.battery_h_full())?;
    evolver_charging_time(ev, &model.params, n)
}

/// Last-root charging time of whatever observable `ev` tracks.
pub fn evolver_charging_time(ev: BlockEvolver, p: &Params, n: u32) -> Result<(ChargingReport, BlockEvolver)> {
    let gamma = ev.decomp.gamma;
    if !(gamma > 0.0) {
        return Err(Error::NotConverged { horizon: f64::INFINITY });
    }
    let e_ss = ev.steady_value()?;
    let e0 = ev.initial();
    let gap = (e0 - e_ss).abs();
    if !(gap > 0.0) {
        return Err(invalid("e_ss", "initial energy must differ from the steady value"));
    }
    let thr = (-(n as f64)).exp() * gap;
    let omega = ev.significant_frequency(SIGNIFICANT_AMPLITUDE * thr);
    let period_step = if omega > 0.0 {
        2.0 * std::f64::consts::PI / omega / SCAN_SAMPLES_PER_PERIOD
    } else {
        f64::INFINITY
    };
    let mut horizon = 4.0 * n as f64 * (1.0 / gamma + gamma / (p.g * p.g).max(1e-300)).max(2.0 * std::f64::consts::PI / p.g);
    for _ in 0..MAX_DOUBLINGS {
        let step = period_step.min(horizon / MIN_SCAN_SAMPLES);
        let steps = (horizon / step).ceil() as usize;
        let h = horizon / steps as f64;
        let vals = ev.values_uniform(h, steps)?;
        let dev: Vec<f64> = vals.iter().map(|e| (e - e_ss).abs()).collect();
        let half = steps / 2;
        let tail_ok = dev[half..].iter().all(|&x| x < 0.5 * thr);
        if tail_ok {
            let k = (0..half).rev().find(|&k| dev[k] >= thr).unwrap_or(0);
            let (mut lo, mut hi) = (k as f64 * h, (k + 1) as f64 * h);
            while hi - lo > 1e-7 * hi {
                let mid = 0.5 * (lo + hi);
                if (ev.value_at(mid)? - e_ss).abs() >= thr {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let report = ChargingReport {
                tau: 0.5 * (lo + hi),
                n,
                e_ss,
                e_max_transient: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                gamma_c: gamma,
                converged: true,
                horizon,
            };
            return Ok((report, ev));
        }
        horizon *= 2.0;
    }
    Err(Error::NotConverged { horizon })
}

/// Poisson weight left above the excitation cutoff of the displaced frame.
pub const DISPLACED_TAIL_TOL: f64 = 1e-14;
/// Extra Fock levels used when evaluating lab-frame battery quantities.
const DISPLACED_MARGIN: usize = 24;

/// Resonant two-oscillator model in the frame displaced by the battery's
/// dark amplitude. With a_B = b - F/g the drive cancels and
/// H = g (a_C^dag b + b^dag a_C), so H and the jump n_C both conserve the
/// total excitation number. Sectors of fixed excitation number are the
/// blocks; nothing leaks between them, so truncating at `n_max`
/// excitations only drops the initial state's Poisson tail.
#[derive(Clone, Debug)]
pub struct DisplacedOscillators {
    /// Displacement F/g; the free ground state is the coherent state |alpha> of b.
    pub alpha: f64,
    pub n_max: usize,
    pub decomp: BlockDecomposition,
    /// Initial state |0>_C |alpha>_b in the sector basis.
    pub rho0: ComplexMatrix,
    /// omega_B (b - alpha)^dag (b - alpha) in the sector basis.
    pub energy_op: ComplexMatrix,
    /// (n_C, n_b) of each sector basis state.
    pub states: Vec<(usize, usize)>,
    omega_b: f64,
}

fn poisson_cutoff(mean: f64, tol: f64) -> usize {
    let mut term = (-mean).exp();
    let mut cum = term;
    let mut k = 0usize;
    while (1.0 - cum > tol || k < 2) && k < 10_000 {
        k += 1;
        term *= mean / k as f64;
        cum += term;
    }
    k
}

impl DisplacedOscillators {
    pub fn new(p: &Params) -> Result<Self> {
        p.validate()?;
        if !p.is_resonant() {
            return Err(Error::RequiresResonance {
                what: "displaced two-oscillator reduction",
            });
        }
        if !(p.g > 0.0) {
            return Err(invalid("g", "displaced frame needs g > 0"));
        }
        let alpha = p.f / p.g;
        let n_max = poisson_cutoff(alpha * alpha, DISPLACED_TAIL_TOL);
        let mut states = Vec::new();
        let mut blocks = Vec::new();
        let mut h = Vec::new();
        let mut l = Vec::new();
        for total in 0..=n_max {
            let start = states.len();
            for nc in 0..=total {
                states.push((nc, total - nc));
            }
            let m = total + 1;
            // a_C^dag b raises n_C by one at the expense of n_b
            let hb = DMatrix::from_fn(m, m, |i, j| {
                let v = if i == j + 1 {
                    ((j + 1) as f64 * (total - j) as f64).sqrt()
                } else if j == i + 1 {
                    ((i + 1) as f64 * (total - i) as f64).sqrt()
                } else {
                    0.0
                };
                C64::new(p.g * v, 0.0)
            });
            h.push(hb);
            l.push((0..m).map(|nc| nc as f64).collect());
            blocks.push(start..states.len());
        }
        let dim = states.len();
        let index = |nc: usize, nb: usize| -> usize {
            let total = nc + nb;
            total * (total + 1) / 2 + nc
        };
        let mut psi = vec![C64::new(0.0, 0.0); dim];
        let mut c = (-0.5 * alpha * alpha).exp();
        for n in 0..=n_max {
            if n > 0 {
                c *= alpha / (n as f64).sqrt();
            }
            psi[index(0, n)] = C64::new(c, 0.0);
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        psi.iter_mut().for_each(|z| *z /= norm);
        let rho0 = ComplexMatrix::outer(&psi);
        let w = p.omega_b;
        let mut energy_op = ComplexMatrix::zeros(dim);
        for (i, &(nc, nb)) in states.iter().enumerate() {
            energy_op[(i, i)] = C64::new(w * (nb as f64 + alpha * alpha), 0.0);
            if nb > 0 {
                let j = index(nc, nb - 1);
                let v = C64::new(-w * alpha * (nb as f64).sqrt(), 0.0);
                energy_op[(j, i)] += v;
                energy_op[(i, j)] += v;
            }
        }
        let decomp = BlockDecomposition {
            basis: ComplexMatrix::identity(dim),
            blocks,
            h,
            l,
            gamma: p.gamma_c,
            min_coupling: 0.0,
        };
        Ok(Self {
            alpha,
            n_max,
            decomp,
            rho0,
            energy_op,
            states,
            omega_b: w,
        })
    }

    /// Evolver of the lab-frame battery energy.
    pub fn energy_evolver(&self) -> Result<BlockEvolver> {
        BlockEvolver::new(self.decomp.clone(), &self.rho0, &self.energy_op)
    }

    /// Long-time state in the sector basis.
    pub fn steady_state(&self) -> Result<ComplexMatrix> {
        self.energy_evolver()?.steady_state(&self.rho0)
    }

    /// Battery state over b Fock levels 0..=n_max.
    pub fn battery_state(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let d = self.n_max + 1;
        let mut out = ComplexMatrix::zeros(d);
        for (i, &(nci, nbi)) in self.states.iter().enumerate() {
            for (j, &(ncj, nbj)) in self.states.iter().enumerate() {
                if nci == ncj {
                    out[(nbi, nbj)] += rho[(i, j)];
                }
            }
        }
        out
    }

    /// Lab-frame battery energy and ergotropy of a state in the sector basis.
    pub fn battery_energy_ergotropy(&self, rho: &ComplexMatrix) -> Result<(f64, f64)> {
        let rb = self.battery_state(rho);
        let d = rb.dim() + DISPLACED_MARGIN;
        let padded = ComplexMatrix::from_fn(d, |i, j| {
            if i < rb.dim() && j < rb.dim() {
                rb[(i, j)]
            } else {
                C64::new(0.0, 0.0)
            }
        });
        // omega_B (b - alpha)^dag (b - alpha) on the padded Fock space
        let a = self.alpha;
        let h = ComplexMatrix::from_fn(d, |i, j| {
            let v = if i == j {
                i as f64 + a * a
            } else if j == i + 1 {
                -a * (j as f64).sqrt()
            } else if i == j + 1 {
                -a * (i as f64).sqrt()
            } else {
                0.0
            };
            C64::new(self.omega_b * v, 0.0)
        });
        Ok((
            crate::metrics::energy(&padded, &h)?,
            crate::metrics::ergotropy(&padded, &h)?,
        ))
    }
}

/// Charging time of the resonant two-oscillator model on the displaced sectors.
pub fn displaced_charging_time(p: &Params, n: u32) -> Result<(ChargingReport, BlockEvolver)> {
    let sys = DisplacedOscillators::new(p)?;
    evolver_charging_time(sys.energy_evolver()?, p, n)
}
