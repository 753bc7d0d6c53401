use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::delta::sample_unit_sphere;
use super::nnls::nnls;
use crate::control_synthesis::{
    ControlSignal, SecondOrderControl, SecondOrderSynthesizer, SynthesisOptions,
};
use crate::error::{Error, Result};
use crate::grid_kdv::{StateVector, Stepper};
use crate::spectral_m::{classify_length, ClassTag, DEFAULT_PAIR_TOL};

/// Placement of the control windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    /// `Quarter` for a single plane, `Packed` otherwise.
    Auto,
    /// One pulse per window, windows a quarter period apart.
    Quarter,
    /// Consecutive windows, each a train of pulses.
    Packed,
}

/// Construction parameters of a [`SteeringLibrary`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LibraryConfig {
    pub layout: Layout,
    /// Steps per pulse; `None` derives it from the shortest quarter period.
    pub window_steps: Option<usize>,
    pub synthesis: SynthesisOptions,
    /// Largest number of pulses per window in the packed layout.
    pub max_pulses: usize,
    /// Candidate pulses in the packed layout.
    pub dictionary: usize,
    /// Samples used for the predicted margin.
    pub delta_samples: usize,
    pub seed: u64,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        Self {
            layout: Layout::Auto,
            window_steps: None,
            synthesis: SynthesisOptions::default(),
            max_pulses: 64,
            dictionary: 32,
            delta_samples: 64,
            seed: 7,
        }
    }
}

/// One control window: samples on steps `start..start + samples.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub samples: Vec<f64>,
    /// Second-order gain of the unit-norm control before rescaling.
    pub gain: f64,
}

impl Window {
    pub fn end(&self) -> usize {
        self.start + self.samples.len()
    }

    pub fn contains(&self, step: usize) -> bool {
        (self.start..self.end()).contains(&step)
    }

    pub fn sup(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Targets and windows of one rotation plane; index `i` holds `psi_{i+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneLibrary {
    pub omega: f64,
    /// Quarter period `q = p / 4`.
    pub quarter: f64,
    /// Offset of the plane in the modal coordinates.
    pub first: usize,
    /// Targets in modal coordinates.
    pub targets: [Vec<f64>; 4],
    pub windows: [Window; 4],
}

/// Controls `u_i^j` with disjoint windows whose second-order effects at
/// the period end are the targets `psi_i^j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringLibrary {
    pub length: f64,
    pub nodes: usize,
    pub dt: f64,
    pub theta: f64,
    pub period_steps: usize,
    pub window_steps: usize,
    pub modal_dim: usize,
    pub planes: Vec<PlaneLibrary>,
    /// Margin of the descent property on the unit sphere of M.
    pub delta: f64,
    /// Lipschitz constant of `v(t, .)` on the unit sphere.
    pub lipschitz: f64,
}

/// Rotation of modal coefficients by the exact free evolution over `t`.
pub(crate) fn rotate_planes(planes: &[PlaneLibrary], a: &[f64], t: f64) -> Vec<f64> {
    let mut out = a.to_vec();
    for p in planes {
        let (s, c) = (p.omega * t).sin_cos();
        let (x, y) = (a[p.first], a[p.first + 1]);
        out[p.first] = c * x - s * y;
        out[p.first + 1] = s * x + c * y;
    }
    out
}

fn unit(angle: f64, first: usize, m: usize) -> Vec<f64> {
    let mut e = vec![0.0; m];
    e[first] = angle.cos();
    e[first + 1] = angle.sin();
    e
}

/// Window distances from the period end, in steps, for every plane.
/// Planes are placed in order; windows of plane `j` sit at phases
/// `c_j + i q_j` modulo the period `p_j` so that all of them need the same
/// target direction at their end.
pub(crate) fn schedule(
    quarters: &[f64],
    periods: &[f64],
    window: usize,
) -> Result<Vec<[usize; 4]>> {
    let gap = 1usize;
    let mut placed: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    let overlaps = |d: usize, placed: &[usize]| {
        placed
            .iter()
            .any(|&o| d < o + window + gap && o < d + window + gap)
    };
    for (j, (&q, &p)) in quarters.iter().zip(periods).enumerate() {
        if (window as f64) + gap as f64 >= q {
            return Err(Error::Config(format!(
                "window of {window} steps does not fit in quarter period {q:.3} steps of plane {}",
                j + 1
            )));
        }
        let phases = if j == 0 { 1 } else { p.ceil() as usize };
        let mut best: Option<(usize, [usize; 4])> = None;
        for c in 0..phases {
            let mut ds = [0usize; 4];
            let mut trial = placed.clone();
            let mut ok = true;
            for (i, d) in ds.iter_mut().enumerate() {
                let base = c as f64 + i as f64 * q;
                let found = (0..16)
                    .map(|k| (base + k as f64 * p).round() as usize)
                    .find(|&cand| !overlaps(cand, &trial));
                match found {
                    Some(cand) => {
                        *d = cand;
                        trial.push(cand);
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                let extent = ds.iter().max().copied().unwrap_or(0);
                if best.is_none_or(|(e, _)| extent < e) {
                    best = Some((extent, ds));
                }
            }
        }
        let (_, ds) =
            best.ok_or_else(|| Error::Config("no disjoint window schedule found".into()))?;
        placed.extend_from_slice(&ds);
        out.push(ds);
    }
    Ok(out)
}

/// Builds the library for the length of `stepper`'s space.
pub fn build_steering_library(stepper: &Stepper, cfg: &LibraryConfig) -> Result<SteeringLibrary> {
    let space = stepper.space();
    let class = classify_length(space.length(), DEFAULT_PAIR_TOL);
    if !matches!(class.tag, ClassTag::N2 | ClassTag::N3) {
        return Err(Error::UnsupportedClass(format!(
            "feedback construction needs a length with only non-stationary pairs, got {:?}",
            class.tag
        )));
    }
    let dt = stepper.dt();
    let quarters: Vec<f64> = space
        .planes()
        .iter()
        .map(|p| p.pair.period().expect("non-stationary pair") / 4.0)
        .collect();
    let qmin = quarters.iter().cloned().fold(f64::INFINITY, f64::min) / dt;
    let layout = match cfg.layout {
        Layout::Auto if quarters.len() == 1 => Layout::Quarter,
        Layout::Auto => Layout::Packed,
        l => l,
    };
    let (window, period_steps, planes) = match layout {
        Layout::Quarter => {
            let w = cfg
                .window_steps
                .unwrap_or_else(|| ((qmin * 142.0 / 286.0).round() as usize).max(8));
            quarter_layout(stepper, cfg, &quarters, w)?
        }
        _ => {
            let w = cfg
                .window_steps
                .unwrap_or_else(|| ((qmin * 250.0 / 286.0).round() as usize).max(8));
            packed_layout(stepper, cfg, &quarters, w)?
        }
    };
    let mut lib = SteeringLibrary {
        length: space.length(),
        nodes: space.grid().nodes(),
        dt,
        theta: stepper.config().theta,
        period_steps,
        window_steps: window,
        modal_dim: space.modal_dim(),
        planes,
        delta: 0.0,
        lipschitz: 0.0,
    };
    lib.lipschitz = lib.lipschitz_bound();
    lib.delta = super::delta::predicted_delta(&lib, cfg.delta_samples.max(1), cfg.seed)?;
    Ok(lib)
}

fn rotate_in_plane(v: &[f64], first: usize, angle: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    let (s, c) = angle.sin_cos();
    let (x, y) = (v[first], v[first + 1]);
    out[first] = c * x - s * y;
    out[first + 1] = s * x + c * y;
    out
}

/// Quarter layout: `psi_1` is the direction of the best single pulse and
/// window `i` ends `(i - 1) q` before the period end.
fn quarter_layout(
    stepper: &Stepper,
    cfg: &LibraryConfig,
    quarters: &[f64],
    window: usize,
) -> Result<(usize, usize, Vec<PlaneLibrary>)> {
    let dt = stepper.dt();
    let m = stepper.space().modal_dim();
    let qsteps: Vec<f64> = quarters.iter().map(|q| q / dt).collect();
    let psteps: Vec<f64> = qsteps.iter().map(|q| 4.0 * q).collect();
    let distances = schedule(&qsteps, &psteps, window)?;
    let period_steps = distances.iter().flatten().max().copied().unwrap_or(0) + window;
    let syn = SecondOrderSynthesizer::new(stepper, window, cfg.synthesis)?;
    let mut out = Vec::new();
    for (j, p) in stepper.space().planes().iter().enumerate() {
        let u0 = syn.find_u0(j)?;
        let angle = u0.m_component[p.first + 1].atan2(u0.m_component[p.first]);
        let d = distances[j];
        let psi1 = unit(angle + p.omega * d[0] as f64 * dt, p.first, m);
        let targets: [Vec<f64>; 4] = std::array::from_fn(|i| {
            rotate_in_plane(&psi1, p.first, p.omega * i as f64 * quarters[j])
        });
        let mut windows = Vec::with_capacity(4);
        for i in 0..4 {
            let res = syn.directed(&syn.rotated_target(&targets[i], d[i]))?;
            windows.push(Window {
                start: period_steps - d[i] - window,
                samples: res.control.scaled(1.0 / res.gain.sqrt()).samples,
                gain: res.gain,
            });
        }
        out.push(PlaneLibrary {
            omega: p.omega,
            quarter: quarters[j],
            first: p.first,
            targets,
            windows: windows.try_into().expect("four windows"),
        });
    }
    Ok((window, period_steps, out))
}

/// Packed layout: `psi_1^j = phi_1^j`; windows follow each other and each
/// is a train of pulses whose rotated second-order effects add up to the
/// target exactly, with weights from nonnegative least squares.
fn packed_layout(
    stepper: &Stepper,
    cfg: &LibraryConfig,
    quarters: &[f64],
    pulse: usize,
) -> Result<(usize, usize, Vec<PlaneLibrary>)> {
    let m = stepper.space().modal_dim();
    let planes = stepper.space().planes();
    let syn = SecondOrderSynthesizer::new(stepper, pulse, cfg.synthesis)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dict: Vec<SecondOrderControl> = (0..cfg.dictionary.max(m))
        .filter_map(|_| syn.support_point(&sample_unit_sphere(&mut rng, m)))
        .collect();
    if dict.is_empty() {
        return Err(Error::Synthesis(
            "no pulse with a positive second-order effect".into(),
        ));
    }
    let targets: Vec<[Vec<f64>; 4]> = planes
        .iter()
        .zip(quarters)
        .map(|(p, q)| {
            let phi1 = unit(0.0, p.first, m);
            std::array::from_fn(|i| rotate_in_plane(&phi1, p.first, p.omega * i as f64 * q))
        })
        .collect();
    let slot = pulse + 1;
    let nwin = 4 * planes.len();
    let mut pulses = m.max(4);
    loop {
        let wlen = pulses * slot - 1;
        let period_steps = nwin * (wlen + 1) - 1;
        let mut windows: Vec<Window> = Vec::with_capacity(nwin);
        for (w, (j, i)) in (0..planes.len())
            .flat_map(|j| (0..4).map(move |i| (j, i)))
            .enumerate()
        {
            let start = w * (wlen + 1);
            let to_end = period_steps - (start + wlen);
            let goal = syn.rotated_target(&targets[j][i], to_end);
            match pulse_train(&syn, &dict, &goal, pulses, slot) {
                Some(samples) => {
                    let norm2 = stepper.dt() * samples.iter().map(|v| v * v).sum::<f64>();
                    windows.push(Window {
                        start,
                        samples,
                        gain: 1.0 / norm2,
                    });
                }
                None => break,
            }
        }
        if windows.len() == nwin {
            let mut it = windows.into_iter();
            let out = planes
                .iter()
                .zip(quarters)
                .zip(targets)
                .map(|((p, q), targets)| PlaneLibrary {
                    omega: p.omega,
                    quarter: *q,
                    first: p.first,
                    targets,
                    windows: std::array::from_fn(|_| it.next().expect("window")),
                })
                .collect();
            return Ok((pulse, period_steps, out));
        }
        if pulses >= cfg.max_pulses {
            return Err(Error::Synthesis(format!(
                "targets not reachable with {pulses} pulses of {pulse} steps"
            )));
        }
        pulses = (2 * pulses).min(cfg.max_pulses.max(1));
    }
}

/// Samples of a train of `pulses` pulses reaching `goal` exactly at its end.
fn pulse_train(
    syn: &SecondOrderSynthesizer<'_>,
    dict: &[SecondOrderControl],
    goal: &[f64],
    pulses: usize,
    slot: usize,
) -> Option<Vec<f64>> {
    let m = goal.len();
    // Column (k, c): pulse c in slot k, observed at the end of the train.
    let mut cols: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    for k in 0..pulses {
        let lag = ((pulses - 1 - k) * slot) as f64;
        for (c, d) in dict.iter().enumerate() {
            cols.push((k, c, syn.free_rotation(&d.m_component, lag)));
        }
    }
    let b = DVector::from_column_slice(goal);
    let bn = b.norm();
    let mut active: Vec<bool> = vec![true; cols.len()];
    for _ in 0..cols.len() {
        let idx: Vec<usize> = (0..cols.len()).filter(|&i| active[i]).collect();
        let a = DMatrix::from_fn(m, idx.len(), |r, c| cols[idx[c]].2[r]);
        let x = nnls(&a, &b);
        if (&a * &x - &b).norm() > 1e-10 * bn {
            return None;
        }
        // One pulse per slot: drop the weakest duplicate and solve again.
        let mut per_slot: Vec<Vec<(usize, f64)>> = vec![Vec::new(); pulses];
        for (c, &i) in idx.iter().enumerate() {
            if x[c] > 0.0 {
                per_slot[cols[i].0].push((i, x[c]));
            }
        }
        if let Some(dup) = per_slot.iter().find(|s| s.len() > 1) {
            let weakest = dup
                .iter()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty")
                .0;
            active[weakest] = false;
            continue;
        }
        let mut samples = vec![0.0; pulses * slot - 1];
        for (k, s) in per_slot.iter().enumerate() {
            if let Some(&(i, w)) = s.first() {
                let ctrl = &dict[cols[i].1].control.samples;
                let off = k * slot;
                for (t, v) in ctrl.iter().enumerate() {
                    samples[off + t] = w.sqrt() * v;
                }
            }
        }
        return Some(samples);
    }
    None
}

impl SteeringLibrary {
    /// Period `T`.
    pub fn period(&self) -> f64 {
        self.period_steps as f64 * self.dt
    }

    pub fn windows(&self) -> impl Iterator<Item = (usize, usize, &Window)> {
        self.planes
            .iter()
            .enumerate()
            .flat_map(|(j, p)| p.windows.iter().enumerate().map(move |(i, w)| (j, i, w)))
    }

    /// Largest `|u_i^j|`; bounds the Lipschitz constant of `v` because at
    /// most one window is active at any time.
    pub fn lipschitz_bound(&self) -> f64 {
        self.windows().map(|(_, _, w)| w.sup()).fold(0.0, f64::max)
    }

    /// `sup |v|` over the unit sphere.
    pub fn v_sup(&self) -> f64 {
        self.lipschitz_bound()
    }

    /// Free evolution of modal coefficients over `t`.
    pub fn rotate(&self, a: &[f64], t: f64) -> Vec<f64> {
        rotate_planes(&self.planes, a, t)
    }

    pub fn check_compatible(&self, stepper: &Stepper) -> Result<()> {
        let space = stepper.space();
        let ok = (space.length() - self.length).abs() <= 1e-12 * self.length
            && space.grid().nodes() == self.nodes
            && (stepper.dt() - self.dt).abs() <= 1e-12 * self.dt
            && space.modal_dim() == self.modal_dim;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(
                "library was built for a different length, grid or time step".into(),
            ))
        }
    }

    fn check_unit(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.modal_dim {
            return Err(Error::Dimension(format!(
                "expected {} modal coefficients, got {}",
                self.modal_dim,
                z.len()
            )));
        }
        let n = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (n - 1.0).abs() > 1e-8 {
            return Err(Error::Domain(format!("direction has norm {n}, expected 1")));
        }
        Ok(())
    }

    /// Nonnegative weights with `-S(T) z = sum_i alpha_i^j psi_i^j`, one
    /// array per plane.
    pub fn decompose_on_targets(&self, z: &[f64]) -> Result<Vec<[f64; 4]>> {
        self.check_unit(z)?;
        Ok(self.decompose_raw(z))
    }

    pub(crate) fn decompose_raw(&self, z: &[f64]) -> Vec<[f64; 4]> {
        let w = self.rotate(z, self.period());
        self.planes
            .iter()
            .map(|p| {
                let (x, y) = (-w[p.first], -w[p.first + 1]);
                let (p1, p2) = (&p.targets[0], &p.targets[1]);
                let (a11, a21) = (p1[p.first], p1[p.first + 1]);
                let (a12, a22) = (p2[p.first], p2[p.first + 1]);
                let det = a11 * a22 - a12 * a21;
                let a = (x * a22 - y * a12) / det;
                let b = (a11 * y - a21 * x) / det;
                [a.max(0.0), b.max(0.0), (-a).max(0.0), (-b).max(0.0)]
            })
            .collect()
    }

    /// `v(t, z)` for `t` in `[0, T]`.
    pub fn v(&self, t: f64, z: &[f64]) -> Result<f64> {
        self.check_unit(z)?;
        if !(0.0..=self.period() * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::Domain(format!(
                "time {t} outside [0, {}]",
                self.period()
            )));
        }
        let step = ((t / self.dt + 1e-7).floor() as usize).min(self.period_steps - 1);
        Ok(self.v_step(step, &self.decompose_raw(z)))
    }

    /// Value on step `step` for precomputed weights.
    pub fn v_step(&self, step: usize, alphas: &[[f64; 4]]) -> f64 {
        let mut out = 0.0;
        for (p, a) in self.planes.iter().zip(alphas) {
            for (w, ai) in p.windows.iter().zip(a) {
                if *ai != 0.0 && w.contains(step) {
                    out += ai * w.samples[step - w.start];
                }
            }
        }
        out
    }

    /// `v(., z)` over one period.
    pub fn v_signal(&self, z: &[f64]) -> Result<ControlSignal> {
        self.check_unit(z)?;
        let alphas = self.decompose_raw(z);
        let samples = (0..self.period_steps)
            .map(|k| self.v_step(k, &alphas))
            .collect();
        Ok(ControlSignal::new(self.dt, samples))
    }

    /// Window control `u_i^j` over the whole period.
    pub fn control(&self, plane: usize, index: usize) -> ControlSignal {
        let w = &self.planes[plane].windows[index];
        let mut samples = vec![0.0; self.period_steps];
        samples[w.start..w.end()].copy_from_slice(&w.samples);
        ControlSignal::new(self.dt, samples)
    }

    /// Target `psi_i^j` as a state.
    pub fn target_state(
        &self,
        stepper: &Stepper,
        plane: usize,
        index: usize,
    ) -> Result<StateVector> {
        StateVector::from_modal(stepper.space(), &self.planes[plane].targets[index])
    }
}
