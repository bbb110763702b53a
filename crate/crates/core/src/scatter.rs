//! Scattering through a chain of constant-potential guide sections.
//!
//! Each section is a stretch of guide with its own cutoff. Frequencies below a
//! section's cutoff couple through it evanescently, which is how tunneling
//! appears in the guide picture. The field and its derivative are continuous
//! at every junction; the chain is solved with 2×2 transfer matrices.
//!
//! Internally the solver propagates `(ψ, ψ')` through each section. Those
//! matrices are real, have unit determinant and stay finite at the cutoff
//! (`k → 0`), and evanescent sections are carried with their growing
//! exponential factored out into a running log-scale. Only the two leads are
//! expressed in forward/backward amplitudes.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{k_of_omega, Wavenumber};
use crate::error::{Error, Result};
use crate::particle::Particle;
use crate::profile::parse_units_comment;
use crate::units::format_number;

/// Which dispersion governs the sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WaveRegime {
    /// `ħω = ħω₀ + V + ħ²k²/2m₀`
    #[default]
    Schrodinger,
    /// `ω² = (ω₀ + V/ħ)² + c²k²`
    KleinGordon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// `None` for a semi-infinite lead.
    pub length: Option<f64>,
    pub potential: f64,
}

impl Segment {
    pub fn lead(potential: f64) -> Self {
        Self {
            length: None,
            potential,
        }
    }

    pub fn section(length: f64, potential: f64) -> Self {
        Self {
            length: Some(length),
            potential,
        }
    }

    pub fn is_lead(&self) -> bool {
        self.length.is_none()
    }

    pub fn cutoff(&self, particle: &Particle) -> f64 {
        particle.rest_frequency() + self.potential
    }
}

/// Lead, interior sections, lead.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Structure {
    segments: Vec<Segment>,
}

impl Structure {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.len() < 2 {
            return Err(Error::InvalidArgument(
                "a structure needs a lead on each side".into(),
            ));
        }
        let last = segments.len() - 1;
        for (i, s) in segments.iter().enumerate() {
            if !s.potential.is_finite() {
                return Err(Error::InvalidArgument(format!("segment {i}: potential is not finite")));
            }
            match (i == 0 || i == last, s.length) {
                (true, None) => {}
                (true, Some(_)) => {
                    return Err(Error::InvalidArgument(format!(
                        "segment {i}: first and last segments must be leads"
                    )))
                }
                (false, None) => {
                    return Err(Error::InvalidArgument(format!("segment {i}: interior lead")))
                }
                (false, Some(l)) if !(l > 0.0 && l.is_finite()) => {
                    return Err(Error::InvalidArgument(format!(
                        "segment {i}: length must be positive and finite, got {l}"
                    )))
                }
                _ => {}
            }
        }
        Ok(Self { segments })
    }

    /// Single rectangular barrier of height `barrier` between leads at `lead`.
    pub fn barrier(lead: f64, barrier: f64, length: f64) -> Result<Self> {
        Self::new(vec![
            Segment::lead(lead),
            Segment::section(length, barrier),
            Segment::lead(lead),
        ])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn interior(&self) -> &[Segment] {
        &self.segments[1..self.segments.len() - 1]
    }

    pub fn left_lead(&self) -> Segment {
        self.segments[0]
    }

    pub fn right_lead(&self) -> Segment {
        self.segments[self.segments.len() - 1]
    }

    pub fn reversed(&self) -> Self {
        let mut segments = self.segments.clone();
        segments.reverse();
        Self { segments }
    }

    /// `self` followed by `other`; the right lead of `self` must match the
    /// left lead of `other`, and becomes a zero-length junction.
    pub fn concat(&self, other: &Structure) -> Result<Self> {
        if self.right_lead().potential != other.left_lead().potential {
            return Err(Error::InvalidArgument(format!(
                "lead mismatch: {} vs {}",
                self.right_lead().potential,
                other.left_lead().potential
            )));
        }
        let mut segments = self.segments[..self.segments.len() - 1].to_vec();
        segments.extend_from_slice(&other.segments[1..]);
        Self::new(segments)
    }

    /// Reads rows of `length,V` where leads are marked by the sentinel
    /// `lead` in the length column. An optional `# units: <length>,<energy>`
    /// line converts to natural units.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let has_units = text
            .lines()
            .any(|l| l.trim_start().starts_with('#') && l.contains("units:"));
        let (length_factor, energy_factor) = if has_units {
            parse_units_comment(text)?
        } else {
            (1.0, 1.0)
        };
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        if headers.len() != 2 || !headers[0].eq_ignore_ascii_case("length") || !headers[1].eq_ignore_ascii_case("v") {
            return Err(Error::Parse("expected header `length,V`".into()));
        }
        let mut segments = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let number = |field: &str| {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: `{field}` is not a number", row + 1)))
            };
            let potential = number(&record[1])? * energy_factor;
            segments.push(if record[0].eq_ignore_ascii_case("lead") {
                Segment::lead(potential)
            } else {
                Segment::section(number(&record[0])? * length_factor, potential)
            });
        }
        Self::new(segments)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["length", "V"])?;
        for s in &self.segments {
            let length = s.length.map_or_else(|| "lead".to_string(), format_number);
            csv.write_record([length, format_number(s.potential)])?;
        }
        csv.flush()?;
        Ok(())
    }
}

/// Axial wavenumber of `segment` at frequency `omega`.
pub fn axial_wavenumber(omega: f64, segment: &Segment, particle: &Particle, regime: WaveRegime) -> Result<Wavenumber> {
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!("ω must be positive, got {omega}")));
    }
    let cutoff = segment.cutoff(particle);
    match regime {
        WaveRegime::KleinGordon => k_of_omega(omega, cutoff),
        WaveRegime::Schrodinger => {
            let k2 = 2.0 * particle.rest_mass() * (omega - cutoff);
            Ok(if k2 >= 0.0 {
                Wavenumber::Real(k2.sqrt())
            } else {
                Wavenumber::Evanescent((-k2).sqrt())
            })
        }
    }
}

/// 2×2 complex map of (forward, backward) amplitudes, stored as
/// `exp(log_scale) · m` so that thick evanescent sections cannot overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub m: [[Complex64; 2]; 2],
    pub log_scale: f64,
}

impl TransferMatrix {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self {
            m: [[one, zero], [zero, one]],
            log_scale: 0.0,
        }
    }

    /// Junction from a medium with wavenumber `k_from` to one with `k_to`,
    /// matching the field and its derivative. Determinant `k_from/k_to`.
    pub fn interface(k_from: Complex64, k_to: Complex64) -> Self {
        let ratio = k_from / k_to;
        let p = (1.0 + ratio) * 0.5;
        let q = (1.0 - ratio) * 0.5;
        Self {
            m: [[p, q], [q, p]],
            log_scale: 0.0,
        }
    }

    /// Propagation over `length` in a medium with complex wavenumber `k`
    /// (`k = iκ` when evanescent).
    pub fn propagation(k: Complex64, length: f64) -> Self {
        let i = Complex64::new(0.0, 1.0);
        // factor out the growing exponential exp(|Im k|·L)
        let growth = k.im.abs() * length;
        let forward = (i * k * length - growth).exp();
        let backward = (-i * k * length - growth).exp();
        let zero = Complex64::new(0.0, 0.0);
        Self {
            m: [[forward, zero], [zero, backward]],
            log_scale: growth,
        }
    }

    /// `after · self`: apply `self` first.
    pub fn then(&self, after: &TransferMatrix) -> Self {
        let a = &after.m;
        let b = &self.m;
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, entry) in row.iter_mut().enumerate() {
                *entry = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Self {
            m,
            log_scale: self.log_scale + after.log_scale,
        }
        .normalized()
    }

    fn normalized(mut self) -> Self {
        let norm = self
            .m
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if norm > 0.0 && (norm > 1e100 || norm < 1e-100) {
            let ln = norm.ln();
            for z in self.m.iter_mut().flatten() {
                *z /= norm;
            }
            self.log_scale += ln;
        }
        self
    }

    /// Determinant including the scale factor; may overflow for very thick
    /// barriers, in which case use [`Self::scaled_determinant`].
    pub fn determinant(&self) -> Complex64 {
        self.scaled_determinant() * (2.0 * self.log_scale).exp()
    }

    pub fn scaled_determinant(&self) -> Complex64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// Entry `(r, c)` including the scale factor.
    pub fn entry(&self, r: usize, c: usize) -> Complex64 {
        self.m[r][c] * self.log_scale.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScatteringResult {
    pub omega: f64,
    pub r: Complex64,
    pub t: Complex64,
    pub reflectance: f64,
    pub transmittance: f64,
    /// `ln T`, finite even when `T` underflows.
    pub log_transmittance: f64,
    pub k_in: f64,
    pub k_out: f64,
}

struct StateMatrix {
    m: [[f64; 2]; 2],
    log_scale: f64,
}

impl StateMatrix {
    /// `(ψ, ψ')` propagation through a section with `k² = k2`.
    fn section(k2: f64, length: f64) -> Self {
        if k2 > 0.0 {
            let k = k2.sqrt();
            let (s, c) = (k * length).sin_cos();
            Self {
                m: [[c, s / k], [-k * s, c]],
                log_scale: 0.0,
            }
        } else if k2 < 0.0 {
            let kappa = (-k2).sqrt();
            let decay = (-2.0 * kappa * length).exp();
            let half_sinh = -(-2.0 * kappa * length).exp_m1() * 0.5;
            let half_cosh = (1.0 + decay) * 0.5;
            Self {
                m: [[half_cosh, half_sinh / kappa], [kappa * half_sinh, half_cosh]],
                log_scale: kappa * length,
            }
        } else {
            Self {
                m: [[1.0, length], [0.0, 1.0]],
                log_scale: 0.0,
            }
        }
    }

    fn then(self, after: StateMatrix) -> Self {
        let (a, b) = (after.m, self.m);
        let m = [
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ];
        let mut out = Self {
            m,
            log_scale: self.log_scale + after.log_scale,
        };
        let norm = out.m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if norm > 1e100 {
            out.m.iter_mut().flatten().for_each(|v| *v /= norm);
            out.log_scale += norm.ln();
        }
        out
    }
}

fn squared_wavenumber(omega: f64, segment: &Segment, particle: &Particle, regime: WaveRegime) -> f64 {
    let cutoff = segment.cutoff(particle);
    match regime {
        WaveRegime::Schrodinger => 2.0 * particle.rest_mass() * (omega - cutoff),
        WaveRegime::KleinGordon => (omega - cutoff) * (omega + cutoff),
    }
}

fn lead_wavenumbers(structure: &Structure, omega: f64, particle: &Particle, regime: WaveRegime) -> Result<(f64, f64)> {
    let k_in = squared_wavenumber(omega, &structure.left_lead(), particle, regime);
    let k_out = squared_wavenumber(omega, &structure.right_lead(), particle, regime);
    if !(k_in > 0.0) {
        return Err(Error::NoPropagatingChannel { side: "left", omega });
    }
    if !(k_out > 0.0) {
        return Err(Error::NoPropagatingChannel { side: "right", omega });
    }
    Ok((k_in.sqrt(), k_out.sqrt()))
}

/// Amplitude transfer matrix of the whole structure, from the left lead's
/// (forward, backward) amplitudes at the first junction to the right lead's
/// at the last junction.
pub fn transfer_matrix(structure: &Structure, omega: f64, particle: &Particle, regime: WaveRegime) -> Result<TransferMatrix> {
    let (k_in, k_out) = lead_wavenumbers(structure, omega, particle, regime)?;
    let chain = structure
        .interior()
        .iter()
        .map(|s| StateMatrix::section(squared_wavenumber(omega, s, particle, regime), s.length.unwrap_or(0.0)))
        .fold(
            StateMatrix {
                m: [[1.0, 0.0], [0.0, 1.0]],
                log_scale: 0.0,
            },
            StateMatrix::then,
        );
    // M = W(k_out)⁻¹ · P · W(k_in), W(k) = [[1, 1], [ik, −ik]]
    let i = Complex64::new(0.0, 1.0);
    let p = chain.m.map(|row| row.map(|v| Complex64::new(v, 0.0)));
    let w_in = [[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)], [i * k_in, -i * k_in]];
    let pw = [
        [
            p[0][0] * w_in[0][0] + p[0][1] * w_in[1][0],
            p[0][0] * w_in[0][1] + p[0][1] * w_in[1][1],
        ],
        [
            p[1][0] * w_in[0][0] + p[1][1] * w_in[1][0],
            p[1][0] * w_in[0][1] + p[1][1] * w_in[1][1],
        ],
    ];
    let half = Complex64::new(0.5, 0.0);
    let inv_ik = 1.0 / (2.0 * i * k_out);
    let w_out_inv = [[half, inv_ik], [half, -inv_ik]];
    let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (r, row) in m.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().enumerate() {
            *entry = w_out_inv[r][0] * pw[0][c] + w_out_inv[r][1] * pw[1][c];
        }
    }
    Ok(TransferMatrix {
        m,
        log_scale: chain.log_scale,
    })
}

/// The same matrix assembled from amplitude-basis junction and propagation
/// matrices; an independent route used for cross-checking.
pub fn transfer_matrix_layered(
    structure: &Structure,
    omega: f64,
    particle: &Particle,
    regime: WaveRegime,
) -> Result<TransferMatrix> {
    let (k_in, _) = lead_wavenumbers(structure, omega, particle, regime)?;
    let mut k_prev = Complex64::new(k_in, 0.0);
    let mut total = TransferMatrix::identity();
    for s in structure.interior() {
        let k = axial_wavenumber(omega, s, particle, regime)?.as_complex();
        total = total
            .then(&TransferMatrix::interface(k_prev, k))
            .then(&TransferMatrix::propagation(k, s.length.unwrap_or(0.0)));
        k_prev = k;
    }
    let k_out = axial_wavenumber(omega, &structure.right_lead(), particle, regime)?.as_complex();
    Ok(total.then(&TransferMatrix::interface(k_prev, k_out)))
}

pub fn scattering(structure: &Structure, omega: f64, particle: &Particle, regime: WaveRegime) -> Result<ScatteringResult> {
    let (k_in, k_out) = lead_wavenumbers(structure, omega, particle, regime)?;
    let matrix = transfer_matrix(structure, omega, particle, regime)?;
    let m22 = matrix.m[1][1];
    let r = -matrix.m[1][0] / m22;
    // t = det M / M22 with det M = k_in/k_out
    let t = (k_in / k_out) * (-matrix.log_scale).exp() / m22;
    let log_transmittance = (k_in / k_out).ln() - 2.0 * matrix.log_scale - 2.0 * m22.norm().ln();
    let transmittance = log_transmittance.exp();
    Ok(ScatteringResult {
        omega,
        r,
        t,
        reflectance: r.norm_sqr(),
        transmittance,
        log_transmittance,
        k_in,
        k_out,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub omega: f64,
    pub result: Option<ScatteringResult>,
    /// Why `result` is missing, e.g. a lead below cutoff.
    pub gap: Option<String>,
}

/// Scattering on a uniform frequency grid. Points where a lead does not
/// propagate are returned as gaps.
pub fn transmission_spectrum(
    structure: &Structure,
    omega_min: f64,
    omega_max: f64,
    n_points: usize,
    particle: &Particle,
    regime: WaveRegime,
) -> Result<Vec<SpectrumPoint>> {
    if n_points < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 spectrum points, got {n_points}")));
    }
    if !(omega_max > omega_min) {
        return Err(Error::InvalidArgument(format!(
            "empty frequency range [{omega_min}, {omega_max}]"
        )));
    }
    let step = (omega_max - omega_min) / (n_points - 1) as f64;
    Ok((0..n_points)
        .into_par_iter()
        .map(|i| {
            let omega = omega_min + i as f64 * step;
            match scattering(structure, omega, particle, regime) {
                Ok(result) => SpectrumPoint {
                    omega,
                    result: Some(result),
                    gap: None,
                },
                Err(err) => SpectrumPoint {
                    omega,
                    result: None,
                    gap: Some(err.to_string()),
                },
            }
        })
        .collect())
}

/// Writes `omega,T,R`; gaps are written with empty T and R.
pub fn write_spectrum_csv<W: std::io::Write>(spectrum: &[SpectrumPoint], writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["omega", "T", "R"])?;
    for p in spectrum {
        match &p.result {
            Some(r) => csv.write_record([format_number(p.omega), format_number(r.transmittance), format_number(r.reflectance)])?,
            None => csv.write_record([format_number(p.omega), String::new(), String::new()])?,
        }
    }
    csv.flush()?;
    Ok(())
}

/// Highest transmission in `[omega_lo, omega_hi]`: a uniform scan followed
/// by golden-section refinement around the best sample.
pub fn transmission_peak(
    structure: &Structure,
    omega_lo: f64,
    omega_hi: f64,
    scan_points: usize,
    particle: &Particle,
    regime: WaveRegime,
) -> Result<(f64, f64)> {
    let t_at = |omega: f64| scattering(structure, omega, particle, regime).map(|r| r.transmittance);
    let n = scan_points.max(3);
    let step = (omega_hi - omega_lo) / (n - 1) as f64;
    let mut best = (omega_lo, t_at(omega_lo)?);
    for i in 1..n {
        let omega = omega_lo + i as f64 * step;
        let t = t_at(omega)?;
        if t > best.1 {
            best = (omega, t);
        }
    }
    let (mut a, mut b) = ((best.0 - step).max(omega_lo), (best.0 + step).min(omega_hi));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - ratio * (b - a);
        let d = a + ratio * (b - a);
        if t_at(c)? > t_at(d)? {
            b = d;
        } else {
            a = c;
        }
        if (b - a).abs() < 1e-14 * b.abs() {
            break;
        }
    }
    let omega = 0.5 * (a + b);
    Ok((omega, t_at(omega)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_mass() -> Particle {
        Particle::electron()
    }

    /// Closed-form rectangular barrier transmission in the Schrödinger regime
    /// (ħ = m = 1), for energies below the barrier top.
    fn analytic_barrier(energy: f64, height: f64, length: f64) -> f64 {
        let k2 = 2.0 * energy;
        let kappa2 = 2.0 * (height - energy);
        let kappa = kappa2.sqrt();
        let sinh = (kappa * length).sinh();
        1.0 / (1.0 + (k2 + kappa2).powi(2) * sinh * sinh / (4.0 * k2 * kappa2))
    }

    #[test]
    fn axial_wavenumber_examples() {
        let p = unit_mass();
        let seg = Segment::section(1.0, 0.25);
        let cutoff = seg.cutoff(&p);
        let k = axial_wavenumber(1.25 * cutoff, &seg, &p, WaveRegime::KleinGordon).unwrap();
        assert!((k.real().unwrap() - 0.75 * cutoff).abs() < 1e-14);
        let k = axial_wavenumber(cutoff, &seg, &p, WaveRegime::KleinGordon).unwrap();
        assert_eq!(k, Wavenumber::Real(0.0));
        match axial_wavenumber(0.8 * cutoff, &seg, &p, WaveRegime::KleinGordon).unwrap() {
            Wavenumber::Evanescent(kappa) => assert!((kappa - 0.6 * cutoff).abs() < 1e-14),
            other => panic!("{other:?}"),
        }
        assert!(axial_wavenumber(0.0, &seg, &p, WaveRegime::KleinGordon).is_err());
    }

    #[test]
    fn empty_structure_transmits_fully() {
        let p = unit_mass();
        let s = Structure::barrier(0.0, 0.0, 3.0).unwrap();
        for regime in [WaveRegime::Schrodinger, WaveRegime::KleinGordon] {
            let r = scattering(&s, 1.7, &p, regime).unwrap();
            assert!((r.transmittance - 1.0).abs() < 1e-14);
            assert!(r.reflectance < 1e-28);
        }
    }

    #[test]
    fn rectangular_barrier_matches_closed_form() {
        let p = unit_mass();
        let s = Structure::barrier(0.0, 2.0, 1.0).unwrap();
        let r = scattering(&s, p.rest_frequency() + 1.0, &p, WaveRegime::Schrodinger).unwrap();
        let expected = 1.0 / 2f64.sqrt().cosh().powi(2);
        assert!((expected - 0.2108).abs() < 1e-4);
        assert!((r.transmittance / expected - 1.0).abs() < 1e-8);
        assert!((analytic_barrier(1.0, 2.0, 1.0) / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn thick_barrier_decay_law() {
        let p = unit_mass();
        let kappa = 2f64.sqrt();
        let lengths: Vec<f64> = (0..6).map(|i| 3.0 + i as f64).collect();
        let ln_t: Vec<f64> = lengths
            .iter()
            .map(|&l| {
                let s = Structure::barrier(0.0, 2.0, l).unwrap();
                scattering(&s, 2.0, &p, WaveRegime::Schrodinger).unwrap().log_transmittance
            })
            .collect();
        let (slope, _) = crate::grid::linear_fit(&lengths, &ln_t);
        assert!((slope / (-2.0 * kappa) - 1.0).abs() < 0.02);
    }

    #[test]
    fn log_space_survives_extreme_barriers() {
        let p = unit_mass();
        // κL = 1000 would overflow cosh
        let l = 1000.0 / 2f64.sqrt();
        let s = Structure::barrier(0.0, 2.0, l).unwrap();
        let r = scattering(&s, 2.0, &p, WaveRegime::Schrodinger).unwrap();
        assert_eq!(r.transmittance, 0.0);
        assert!((r.reflectance - 1.0).abs() < 1e-12);
        // ln T = ln(16 k²κ²/(k²+κ²)²) − 2κL for κL ≫ 1; here k = κ
        let expected = (16.0f64 * 4.0 / 16.0).ln() - 2000.0;
        assert!((r.log_transmittance - expected).abs() < 1e-9 * expected.abs());
    }

    #[test]
    fn transmission_is_continuous_at_barrier_top() {
        let p = unit_mass();
        let s = Structure::barrier(0.0, 2.0, 1.0).unwrap();
        let top = p.rest_frequency() + 2.0;
        for regime in [WaveRegime::Schrodinger, WaveRegime::KleinGordon] {
            let at = |omega| scattering(&s, omega, &p, regime).unwrap().transmittance;
            let below = at(top - 1e-9);
            let exact = at(top);
            let above = at(top + 1e-9);
            assert!((below - exact).abs() < 1e-7 && (above - exact).abs() < 1e-7);
        }
    }

    #[test]
    fn double_barrier_has_unit_resonance() {
        let p = unit_mass();
        let s = Structure::new(vec![
            Segment::lead(0.0),
            Segment::section(0.8, 1.0),
            Segment::section(3.0, 0.0),
            Segment::section(0.8, 1.0),
            Segment::lead(0.0),
        ])
        .unwrap();
        let (omega, t) = transmission_peak(&s, 1.05, 1.95, 400, &p, WaveRegime::Schrodinger).unwrap();
        assert!(omega < 2.0);
        assert!(t > 1.0 - 1e-8, "peak T = {t}");
    }

    #[test]
    fn no_channel_in_lead() {
        let p = unit_mass();
        let s = Structure::new(vec![Segment::lead(0.0), Segment::section(1.0, 0.0), Segment::lead(5.0)]).unwrap();
        assert!(matches!(
            scattering(&s, 2.0, &p, WaveRegime::Schrodinger),
            Err(Error::NoPropagatingChannel { side: "right", .. })
        ));
        let spectrum = transmission_spectrum(&s, 1.5, 8.0, 14, &p, WaveRegime::Schrodinger).unwrap();
        assert!(spectrum.iter().any(|pt| pt.gap.is_some()));
        assert!(spectrum.iter().any(|pt| pt.result.is_some()));
        assert!(spectrum.windows(2).all(|w| w[1].omega > w[0].omega));
    }

    #[test]
    fn structure_validation() {
        assert!(Structure::new(vec![Segment::lead(0.0)]).is_err());
        assert!(Structure::new(vec![Segment::section(1.0, 0.0), Segment::lead(0.0)]).is_err());
        assert!(Structure::new(vec![Segment::lead(0.0), Segment::section(-1.0, 0.0), Segment::lead(0.0)]).is_err());
        assert!(Structure::new(vec![Segment::lead(0.0), Segment::lead(1.0), Segment::lead(0.0)]).is_err());
        assert!(transmission_spectrum(&Structure::barrier(0.0, 1.0, 1.0).unwrap(), 1.0, 2.0, 1, &unit_mass(), WaveRegime::Schrodinger).is_err());
    }

    #[test]
    fn structure_csv_round_trip() {
        let text = "length,V\nlead,0\n1.5,2\n0.5,-0.25\nlead,0.1\n";
        let s = Structure::parse_csv(text).unwrap();
        assert_eq!(s.segments().len(), 4);
        assert!(s.left_lead().is_lead());
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        assert_eq!(Structure::parse_csv(std::str::from_utf8(&out).unwrap()).unwrap(), s);
        assert!(Structure::parse_csv("length,V\n1.0,0\nlead,0\n").is_err());
    }

    #[test]
    fn interface_determinant_is_wavenumber_ratio() {
        let m = TransferMatrix::interface(Complex64::new(2.0, 0.0), Complex64::new(0.5, 0.0));
        assert!((m.determinant() - Complex64::new(4.0, 0.0)).norm() < 1e-14);
    }

    fn five_segments(seed: [f64; 5]) -> Structure {
        Structure::new(vec![
            Segment::lead(0.0),
            Segment::section(0.5 + seed[0], 0.8 * seed[1]),
            Segment::section(0.3 + seed[2], -0.2),
            Segment::section(1.0, 1.5 * seed[3]),
            Segment::section(0.2 + seed[4], 0.3),
            Segment::section(0.7, 0.9),
            Segment::lead(0.4),
        ])
        .unwrap()
    }

    proptest! {
        #[test]
        fn unitarity_and_reciprocity(
            seed in proptest::array::uniform5(0.0f64..1.0),
            energy in 0.45f64..3.0,
        ) {
            let p = unit_mass();
            let s = five_segments(seed);
            for regime in [WaveRegime::Schrodinger, WaveRegime::KleinGordon] {
                let omega = p.rest_frequency() + energy;
                let forward = scattering(&s, omega, &p, regime).unwrap();
                let backward = scattering(&s.reversed(), omega, &p, regime).unwrap();
                prop_assert!((forward.reflectance + forward.transmittance - 1.0).abs() < 1e-10);
                prop_assert!((forward.transmittance - backward.transmittance).abs() < 1e-10);
                prop_assert!((0.0..=1.0 + 1e-12).contains(&forward.transmittance));
            }
        }

        #[test]
        fn layered_route_matches_state_route(
            seed in proptest::array::uniform5(0.0f64..1.0),
            energy in 0.45f64..3.0,
        ) {
            let p = unit_mass();
            let s = five_segments(seed);
            let omega = p.rest_frequency() + energy;
            let a = transfer_matrix(&s, omega, &p, WaveRegime::Schrodinger).unwrap();
            let b = transfer_matrix_layered(&s, omega, &p, WaveRegime::Schrodinger).unwrap();
            let scale = (0..2).flat_map(|r| (0..2).map(move |c| (r, c)))
                .map(|(r, c)| a.entry(r, c).norm()).fold(0.0, f64::max);
            for r in 0..2 {
                for c in 0..2 {
                    prop_assert!((a.entry(r, c) - b.entry(r, c)).norm() < 1e-10 * scale);
                }
            }
            let det = a.determinant();
            let k = |seg: &Segment| (2.0 * (omega - seg.cutoff(&p))).sqrt();
            prop_assert!((det - Complex64::new(k(&s.left_lead()) / k(&s.right_lead()), 0.0)).norm() < 1e-10);
        }

        #[test]
        fn composition_matches_concatenation(
            seed in proptest::array::uniform5(0.0f64..1.0),
            energy in 0.45f64..3.0,
        ) {
            let p = unit_mass();
            let a = five_segments(seed);
            let b = Structure::new(vec![
                Segment::lead(0.4),
                Segment::section(0.6 + seed[1], 1.2),
                Segment::section(0.4, 0.1 + seed[2]),
                Segment::lead(0.0),
            ]).unwrap();
            let omega = p.rest_frequency() + energy;
            let whole = transfer_matrix(&a.concat(&b).unwrap(), omega, &p, WaveRegime::Schrodinger).unwrap();
            let composed = transfer_matrix(&a, omega, &p, WaveRegime::Schrodinger).unwrap()
                .then(&transfer_matrix(&b, omega, &p, WaveRegime::Schrodinger).unwrap());
            let scale = whole.entry(1, 1).norm();
            for r in 0..2 {
                for c in 0..2 {
                    prop_assert!((whole.entry(r, c) - composed.entry(r, c)).norm() < 1e-10 * scale);
                }
            }
        }

        #[test]
        fn closed_form_agreement(length in 0.2f64..3.0, energy in 0.1f64..1.9) {
            let p = unit_mass();
            let s = Structure::barrier(0.0, 2.0, length).unwrap();
            let expected = analytic_barrier(energy, 2.0, length);
            prop_assume!(expected > 0.1);
            let got = scattering(&s, 1.0 + energy, &p, WaveRegime::Schrodinger).unwrap().transmittance;
            prop_assert!((got / expected - 1.0).abs() < 1e-8);
        }
    }
}
