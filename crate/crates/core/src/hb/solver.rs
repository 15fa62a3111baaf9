//! Harmonic-balance Newton solver on the subharmonic grid `k·f_d`.
//!
//! Unknowns are real: per node, the DC value followed by (Re, Im) of each
//! harmonic `k = 1..=K`. The linear subnetwork is stamped per harmonic; each
//! junction is sampled in time, evaluated through its charge and conduction
//! laws, and transformed back.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lu_factor, DenseMatrix, LuFactors};
use crate::linear::compile::{Compiled, JunctionStamp, SourceRole};
use crate::model::{ElementKind, Netlist, NodeId};

/// Conductance from every node to ground at DC.
pub const GMIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HbOptions {
    /// Highest harmonic of the divided frequency.
    pub k_harmonics: usize,
    /// Time samples per period; `None` uses `4K + 1`.
    pub time_samples: Option<usize>,
    /// Residual tolerance relative to the drive Norton current.
    pub rel_tol: f64,
    /// Absolute residual floor, A.
    pub abs_tol: f64,
    pub max_iter: usize,
    /// Largest junction-voltage change allowed per Newton step, V.
    pub v_step_limit: f64,
}

impl Default for HbOptions {
    fn default() -> Self {
        Self {
            k_harmonics: 7,
            time_samples: None,
            rel_tol: 1e-9,
            abs_tol: 1e-15,
            max_iter: 100,
            v_step_limit: 0.3,
        }
    }
}

/// Phasors at `k·f0` for `k = 0..=K`; entry 0 is the real DC value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSpectrum {
    pub f0: f64,
    pub phasors: Vec<Complex64>,
}

impl HarmonicSpectrum {
    pub fn magnitude(&self, k: usize) -> f64 {
        self.phasors.get(k).map_or(0.0, |p| p.norm())
    }

    /// Waveform value at time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let w = 2.0 * PI * self.f0 * t;
        self.phasors
            .iter()
            .enumerate()
            .map(|(k, p)| (p * Complex64::from_polar(1.0, k as f64 * w)).re)
            .sum()
    }
}

/// Raw Newton state, reusable as a warm start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HbState {
    pub k_harmonics: usize,
    pub values: Vec<f64>,
}

impl HbState {
    /// The state delayed by one drive period: odd harmonics of the divided
    /// frequency change sign. A period-doubled response has two such phase
    /// states; the auxiliary generator makes them differ slightly.
    pub fn drive_period_shifted(&self) -> HbState {
        let per = 2 * self.k_harmonics + 1;
        let mut values = self.values.clone();
        for block in values.chunks_mut(per) {
            for h in (1..=self.k_harmonics).step_by(2) {
                block[2 * h - 1] = -block[2 * h - 1];
                block[2 * h] = -block[2 * h];
            }
        }
        HbState {
            k_harmonics: self.k_harmonics,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HbSolution {
    pub f_in: f64,
    /// Available drive power, W.
    pub p_in: f64,
    pub spectra: BTreeMap<NodeId, HarmonicSpectrum>,
    /// Junction voltage of each varactor, keyed by element name.
    pub junctions: BTreeMap<String, HarmonicSpectrum>,
    /// Largest forward excursion of any junction from its bias, V.
    pub diode_v_peak: f64,
    /// Power leaving the output port at the divided frequency, W.
    pub p_sub: f64,
    pub s21_ls: Complex64,
    pub s11_ls: Complex64,
    pub convergence: Convergence,
    /// Sign of the Jacobian determinant at the solution.
    pub jacobian_sign: f64,
    pub state: HbState,
}

/// Harmonic-balance problem prepared for repeated solves at one drive frequency.
pub struct HbSystem {
    pub(crate) c: Compiled,
    pub(crate) k: usize,
    nt: usize,
    f0: f64,
    f_in: f64,
    /// Linear part of the Jacobian (constant).
    linear: DenseMatrix<f64>,
    cos: Vec<Vec<f64>>,
    sin: Vec<Vec<f64>>,
    drive_port: usize,
    output_port: usize,
    pag_emf: f64,
    opts: HbOptions,
}

impl HbSystem {
    /// Prepares `net` with the drive retuned to `f_in` (pAG to `f_in / 2`).
    pub fn new(net: &Netlist, f_in: f64, opts: HbOptions) -> Result<Self> {
        if opts.k_harmonics < 4 {
            return Err(Error::Config(format!("need at least 4 harmonics, got {}", opts.k_harmonics)));
        }
        let cw_count = net.elements.iter().filter(|e| matches!(e.kind, ElementKind::CwSource(_))).count();
        let pag_count = net.elements.iter().filter(|e| matches!(e.kind, ElementKind::PagSource(_))).count();
        if cw_count != 1 {
            return Err(Error::Config(format!("harmonic balance needs exactly one cw source, found {cw_count}")));
        }
        if pag_count != 1 {
            return Err(Error::Config(format!(
                "harmonic balance needs exactly one pAG source at f_in/2, found {pag_count}"
            )));
        }
        let net = net.retuned(f_in);
        net.validate()?;
        let c = Compiled::build(&net, &Default::default())?;
        let k = opts.k_harmonics;
        let nt = opts.time_samples.unwrap_or(4 * k + 1).max(2 * k + 1);
        let f0 = f_in / 2.0;
        let cw = c.source(SourceRole::Cw).expect("checked above").clone();
        let pag = c.source(SourceRole::Pag).expect("checked above").clone();
        let per = 2 * k + 1;
        let n = c.dim();
        let mut linear = DenseMatrix::zeros(n * per);
        for h in 0..=k {
            let y = c.admittance(2.0 * PI * f0 * h as f64, JunctionStamp::Omit);
            for i in 0..n {
                for j in 0..n {
                    let yij = y[(i, j)];
                    if h == 0 {
                        linear.add(i * per, j * per, yij.re);
                    } else {
                        let (ri, ii) = (i * per + 2 * h - 1, i * per + 2 * h);
                        let (rj, ij) = (j * per + 2 * h - 1, j * per + 2 * h);
                        linear.add(ri, rj, yij.re);
                        linear.add(ri, ij, -yij.im);
                        linear.add(ii, rj, yij.im);
                        linear.add(ii, ij, yij.re);
                    }
                }
                if h == 0 {
                    linear.add(i * per, i * per, GMIN);
                }
            }
        }
        let theta = |n_: usize| 2.0 * PI * n_ as f64 / nt as f64;
        let cos = (0..=k).map(|h| (0..nt).map(|s| (h as f64 * theta(s)).cos()).collect()).collect();
        let sin = (0..=k).map(|h| (0..nt).map(|s| (h as f64 * theta(s)).sin()).collect()).collect();
        Ok(Self {
            k,
            nt,
            f0,
            f_in,
            linear,
            cos,
            sin,
            drive_port: cw.port,
            output_port: pag.port,
            pag_emf: pag.spec.emf(),
            c,
            opts,
        })
    }

    fn per(&self) -> usize {
        2 * self.k + 1
    }

    pub fn dim(&self) -> usize {
        self.c.dim() * self.per()
    }

    fn cw_z0(&self) -> f64 {
        self.c.ports[self.drive_port].z0
    }

    fn emf_for(&self, p_in: f64) -> f64 {
        (8.0 * self.cw_z0() * p_in).sqrt()
    }

    /// Source current vector for drive power `p_in`.
    fn excitation(&self, p_in: f64) -> Vec<f64> {
        let mut rhs = vec![0.0; self.dim()];
        let per = self.per();
        let mut inject = |port: usize, h: usize, amp: f64| {
            let p = &self.c.ports[port];
            let i = amp / p.z0;
            if let Some(a) = p.a {
                rhs[a * per + 2 * h - 1] += i;
            }
            if let Some(b) = p.b {
                rhs[b * per + 2 * h - 1] -= i;
            }
        };
        inject(self.drive_port, 2, self.emf_for(p_in));
        inject(self.output_port, 1, self.pag_emf);
        rhs
    }

    fn component(&self, x: &[f64], node: Option<usize>, comp: usize) -> f64 {
        node.map_or(0.0, |i| x[i * self.per() + comp])
    }

    /// Junction voltage samples over one period of `f0`.
    fn junction_samples(&self, x: &[f64], a: Option<usize>, b: Option<usize>) -> Vec<f64> {
        let u: Vec<f64> = (0..self.per())
            .map(|c| self.component(x, a, c) - self.component(x, b, c))
            .collect();
        (0..self.nt)
            .map(|s| {
                let mut v = u[0];
                for h in 1..=self.k {
                    v += u[2 * h - 1] * self.cos[h][s] - u[2 * h] * self.sin[h][s];
                }
                v
            })
            .collect()
    }

    /// Forward transform of samples to (DC, Re1, Im1, ...).
    fn analyze(&self, x: &[f64]) -> Vec<f64> {
        let n = self.nt as f64;
        let mut out = vec![0.0; self.per()];
        out[0] = x.iter().sum::<f64>() / n;
        for h in 1..=self.k {
            let (mut re, mut im) = (0.0, 0.0);
            for (s, &v) in x.iter().enumerate() {
                re += v * self.cos[h][s];
                im -= v * self.sin[h][s];
            }
            out[2 * h - 1] = 2.0 * re / n;
            out[2 * h] = 2.0 * im / n;
        }
        out
    }

    /// Basis function of component `c` at sample `s`.
    fn basis(&self, c: usize, s: usize) -> f64 {
        if c == 0 {
            1.0
        } else if c % 2 == 1 {
            self.cos[c.div_ceil(2)][s]
        } else {
            -self.sin[c / 2][s]
        }
    }

    /// Residual and, optionally, the Jacobian at state `x`.
    fn evaluate(&self, x: &[f64], rhs: &[f64], jac: bool) -> (Vec<f64>, Option<DenseMatrix<f64>>) {
        let mut f = self.linear.mul_vec(x);
        for (fi, r) in f.iter_mut().zip(rhs) {
            *fi -= r;
        }
        let mut jm = jac.then(|| self.linear.clone());
        let per = self.per();
        let w0 = 2.0 * PI * self.f0;
        for j in &self.c.junctions {
            let v = self.junction_samples(x, j.a, j.b);
            let (mut q, mut cap, mut i, mut g) = (
                vec![0.0; self.nt],
                vec![0.0; self.nt],
                vec![0.0; self.nt],
                vec![0.0; self.nt],
            );
            for s in 0..self.nt {
                (q[s], cap[s]) = j.device.charge_dev(v[s]);
                (i[s], g[s]) = j.device.current_dev(v[s]);
            }
            let qh = self.analyze(&q);
            let ih = self.analyze(&i);
            // current leaving the cathode node: I + j k w0 Q
            let mut out = ih.clone();
            for h in 1..=self.k {
                let kw = h as f64 * w0;
                out[2 * h - 1] -= kw * qh[2 * h];
                out[2 * h] += kw * qh[2 * h - 1];
            }
            for c in 0..per {
                if let Some(a) = j.a {
                    f[a * per + c] += out[c];
                }
                if let Some(b) = j.b {
                    f[b * per + c] -= out[c];
                }
            }
            if let Some(m) = jm.as_mut() {
                let mut block = vec![vec![0.0; per]; per];
                for p in 0..per {
                    let gp: Vec<f64> = (0..self.nt).map(|s| g[s] * self.basis(p, s)).collect();
                    let cp: Vec<f64> = (0..self.nt).map(|s| cap[s] * self.basis(p, s)).collect();
                    let gh = self.analyze(&gp);
                    let ch = self.analyze(&cp);
                    block[0][p] = gh[0];
                    for h in 1..=self.k {
                        let kw = h as f64 * w0;
                        block[2 * h - 1][p] = gh[2 * h - 1] - kw * ch[2 * h];
                        block[2 * h][p] = gh[2 * h] + kw * ch[2 * h - 1];
                    }
                }
                for (ra, sa) in [(j.a, 1.0), (j.b, -1.0)] {
                    let Some(ra) = ra else { continue };
                    for (cb, sb) in [(j.a, 1.0), (j.b, -1.0)] {
                        let Some(cb) = cb else { continue };
                        for r in 0..per {
                            for p in 0..per {
                                m.add(ra * per + r, cb * per + p, sa * sb * block[r][p]);
                            }
                        }
                    }
                }
            }
        }
        (f, jm)
    }

    fn max_junction_change(&self, dx: &[f64]) -> f64 {
        self.c
            .junctions
            .iter()
            .flat_map(|j| self.junction_samples(dx, j.a, j.b))
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Tolerance on the max-norm residual for drive power `p_in`.
    pub fn tolerance(&self, p_in: f64) -> f64 {
        (self.opts.rel_tol * self.emf_for(p_in) / self.cw_z0()).max(self.opts.abs_tol)
    }

    /// Newton solve at drive power `p_in`, optionally warm-started.
    pub fn solve(&self, p_in: f64, init: Option<&HbState>) -> Result<HbSolution> {
        self.solve_capped(p_in, init, self.opts.max_iter)
    }

    /// [`HbSystem::solve`] with its own iteration budget.
    pub(crate) fn solve_capped(&self, p_in: f64, init: Option<&HbState>, max_iter: usize) -> Result<HbSolution> {
        if !(p_in.is_finite() && p_in > 0.0) {
            return Err(Error::Domain(format!("drive power must be positive, got {p_in}")));
        }
        let rhs = self.excitation(p_in);
        let mut x = match init {
            Some(s) if s.k_harmonics == self.k && s.values.len() == self.dim() => s.values.clone(),
            Some(_) => return Err(Error::Config("warm-start state does not match this system".into())),
            None => vec![0.0; self.dim()],
        };
        let tol = self.tolerance(p_in);
        let inf_norm = |f: &[f64]| f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let two_norm = |f: &[f64]| f.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut history = Vec::new();
        let (mut f, mut jm) = self.evaluate(&x, &rhs, true);
        let mut res = inf_norm(&f);
        history.push(res);
        let mut iterations = 0;
        let mut lu: Option<LuFactors<f64>> = None;
        while iterations < max_iter {
            let factors = lu_factor(jm.take().expect("jacobian requested"), None).map_err(|e| {
                Error::DegenerateTopology {
                    node: self.c.nodes.get(e.row / self.per()).copied().flatten().unwrap_or(0),
                    detail: "harmonic-balance Jacobian is singular".into(),
                }
            })?;
            if res < tol {
                lu = Some(factors);
                break;
            }
            iterations += 1;
            let neg: Vec<f64> = f.iter().map(|v| -v).collect();
            let dx = factors.solve(&neg);
            let dv = self.max_junction_change(&dx);
            let mut lambda = if dv > self.opts.v_step_limit {
                self.opts.v_step_limit / dv
            } else {
                1.0
            };
            let base = two_norm(&f);
            let mut accepted = None;
            for _ in 0..20 {
                let xn: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + lambda * d).collect();
                let (fnew, _) = self.evaluate(&xn, &rhs, false);
                if fnew.iter().all(|v| v.is_finite()) && two_norm(&fnew) < base * (1.0 - 1e-4 * lambda) {
                    accepted = Some(xn);
                    break;
                }
                lambda *= 0.5;
            }
            // accept a tiny step anyway so stagnation shows up in the history
            let xn = accepted.unwrap_or_else(|| x.iter().zip(&dx).map(|(a, d)| a + lambda * d).collect());
            x = xn;
            let (fnew, jnew) = self.evaluate(&x, &rhs, true);
            f = fnew;
            jm = jnew;
            res = inf_norm(&f);
            history.push(res);
            if !res.is_finite() {
                break;
            }
        }
        let Some(factors) = lu else {
            return Err(Error::NoConvergence {
                iterations,
                residual: res,
                history,
            });
        };
        Ok(self.package(p_in, x, iterations, res, tol, factors.det_sign()))
    }

    fn spectrum_of(&self, x: &[f64], a: Option<usize>, b: Option<usize>) -> HarmonicSpectrum {
        let comp = |c: usize| self.component(x, a, c) - self.component(x, b, c);
        let mut phasors = vec![Complex64::new(comp(0), 0.0)];
        for h in 1..=self.k {
            phasors.push(Complex64::new(comp(2 * h - 1), comp(2 * h)));
        }
        HarmonicSpectrum { f0: self.f0, phasors }
    }

    fn package(&self, p_in: f64, x: Vec<f64>, iterations: usize, residual: f64, tolerance: f64, sign: f64) -> HbSolution {
        let spectra = self
            .c
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.map(|n| (n, self.spectrum_of(&x, Some(i), None))))
            .collect();
        let mut junctions = BTreeMap::new();
        let mut diode_v_peak = 0.0f64;
        for j in &self.c.junctions {
            let sp = self.spectrum_of(&x, j.a, j.b);
            let fine = 32 * (self.k + 1);
            for s in 0..fine {
                let t = s as f64 / (fine as f64 * self.f0);
                diode_v_peak = diode_v_peak.max(-sp.eval(t));
            }
            junctions.insert(j.name.clone(), sp);
        }
        let port_v = |port: usize, h: usize| {
            let p = &self.c.ports[port];
            let sp = self.spectrum_of(&x, p.a, p.b);
            sp.phasors[h]
        };
        let e_cw = self.emf_for(p_in);
        let z_out = self.c.ports[self.output_port].z0;
        let b_sub = 2.0 * port_v(self.output_port, 1) - self.pag_emf;
        let p_sub = b_sub.norm_sqr() / (8.0 * z_out);
        let s21_ls = 2.0 * port_v(self.output_port, 2) / e_cw * (self.cw_z0() / z_out).sqrt();
        let s11_ls = (2.0 * port_v(self.drive_port, 2) - e_cw) / e_cw;
        HbSolution {
            f_in: self.f_in,
            p_in,
            spectra,
            junctions,
            diode_v_peak,
            p_sub,
            s21_ls,
            s11_ls,
            convergence: Convergence {
                converged: true,
                iterations,
                residual,
                tolerance,
            },
            jacobian_sign: sign,
            state: HbState {
                k_harmonics: self.k,
                values: x,
            },
        }
    }

    /// Copy of `state` with every odd harmonic multiplied by `gain` and rotated
    /// by `phase`; pushes a non-divided state toward the divided branch.
    pub fn kicked(&self, state: &HbState, gain: f64, phase: f64, floor: f64) -> HbState {
        let per = self.per();
        let mut values = state.values.clone();
        let rot = Complex64::from_polar(1.0, phase);
        for node in 0..self.c.dim() {
            // pump amplitude at this node sets the scale of the seeded subharmonic
            let pump = Complex64::new(values[node * per + 3], values[node * per + 4]).norm();
            for h in (1..=self.k).step_by(2) {
                let (ri, ii) = (node * per + 2 * h - 1, node * per + 2 * h);
                let mut z = Complex64::new(values[ri], values[ii]);
                if h == 1 {
                    let target = (gain * pump).max(floor);
                    z = if z.norm() > 0.0 { z / z.norm() * target } else { Complex64::new(target, 0.0) };
                    z *= rot;
                } else {
                    z *= gain.min(1.0);
                }
                values[ri] = z.re;
                values[ii] = z.im;
            }
        }
        HbState {
            k_harmonics: state.k_harmonics,
            values,
        }
    }

    /// Power bookkeeping of a converged solution.
    pub fn power_balance(&self, sol: &HbSolution) -> PowerBalance {
        let x = &sol.state.values;
        let per = self.per();
        let w0 = 2.0 * PI * self.f0;
        let mut dissipated = 0.0;
        let phasor = |i: Option<usize>, h: usize| -> Complex64 {
            match i {
                None => Complex64::default(),
                Some(i) if h == 0 => Complex64::new(x[i * per], 0.0),
                Some(i) => Complex64::new(x[i * per + 2 * h - 1], x[i * per + 2 * h]),
            }
        };
        for br in &self.c.branches {
            for h in 0..=self.k {
                let v = phasor(br.a, h) - phasor(br.b, h);
                let y = br.admittance(w0 * h as f64);
                let scale = if h == 0 { 1.0 } else { 0.5 };
                dissipated += scale * v.norm_sqr() * y.re;
            }
        }
        for j in &self.c.junctions {
            let v = self.junction_samples(x, j.a, j.b);
            let avg: f64 = v.iter().map(|&vs| vs * j.device.current_dev(vs).0).sum::<f64>() / self.nt as f64;
            dissipated += avg;
        }
        let mut available = 0.0;
        let mut reflected = 0.0;
        let mut delivered = 0.0;
        for (pi, p) in self.c.ports.iter().enumerate() {
            for h in 0..=self.k {
                let emf = if pi == self.drive_port && h == 2 {
                    self.emf_for(sol.p_in)
                } else if pi == self.output_port && h == 1 {
                    self.pag_emf
                } else {
                    0.0
                };
                let v = phasor(p.a, h) - phasor(p.b, h);
                let scale = if h == 0 { 2.0 } else { 1.0 };
                let b = (2.0 * v - emf).norm_sqr() / (8.0 * p.z0) * scale;
                if emf > 0.0 {
                    available += emf * emf / (8.0 * p.z0);
                    reflected += b;
                } else {
                    delivered += b;
                }
            }
        }
        PowerBalance {
            available,
            reflected,
            delivered,
            dissipated,
        }
    }
}

/// Power accounting at one operating point, W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBalance {
    pub available: f64,
    /// Power returned to the driven ports at their source frequencies.
    pub reflected: f64,
    /// Power into undriven terminations.
    pub delivered: f64,
    /// Power absorbed inside the network.
    pub dissipated: f64,
}

impl PowerBalance {
    /// Relative mismatch of `available = reflected + delivered + dissipated`.
    pub fn relative_error(&self) -> f64 {
        (self.available - self.reflected - self.delivered - self.dissipated).abs() / self.available
    }
}

/// One-shot solve; see [`HbSystem::solve`].
pub fn hb_solve(net: &Netlist, f_in: f64, p_in: f64, opts: HbOptions, init: Option<&HbState>) -> Result<HbSolution> {
    HbSystem::new(net, f_in, opts)?.solve(p_in, init)
}
