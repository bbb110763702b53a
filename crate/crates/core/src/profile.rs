//! Sampled potentials `V(x)` on a uniform grid.
//!
//! The potential is the only carrier of interactions in the waveguide picture,
//! so every other module consumes a [`PotentialProfile`]. Profiles are sampled
//! once and then interpolated either linearly (step-like structures) or with
//! a natural cubic spline, which provides the two continuous derivatives the
//! local quantum potential needs.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::units::{format_number, parse_energy_unit, parse_length_unit, FINE_STRUCTURE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Linear,
    #[default]
    CubicSpline,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialProfile {
    grid: UniformGrid,
    values: Vec<f64>,
    interpolation: Interpolation,
    /// Spline second derivatives at the nodes; all zero for linear profiles.
    curvature: Vec<f64>,
}

impl PotentialProfile {
    pub fn new(grid: UniformGrid, values: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} potential samples for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "potential is not finite at x = {}",
                grid.x(i)
            )));
        }
        let curvature = match interpolation {
            Interpolation::Linear => vec![0.0; values.len()],
            Interpolation::CubicSpline => natural_spline_curvature(&values, grid.step()),
        };
        Ok(Self {
            grid,
            values,
            interpolation,
            curvature,
        })
    }

    pub fn from_samples(x: &[f64], values: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        Self::new(UniformGrid::from_positions(x)?, values, interpolation)
    }

    pub fn from_fn(grid: UniformGrid, interpolation: Interpolation, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().map(f).collect();
        Self::new(grid, values, interpolation)
    }

    pub fn from_family(grid: UniformGrid, interpolation: Interpolation, family: &PotentialFamily) -> Result<Self> {
        family.validate()?;
        Self::from_fn(grid, interpolation, |x| family.eval(x))
    }

    pub fn constant(grid: UniformGrid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()], Interpolation::CubicSpline)
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn cell(&self, x: f64) -> (usize, f64, f64) {
        let (i, t) = self.grid.locate(x);
        (i, 1.0 - t, t)
    }

    /// Interpolated `V(x)`. Outside the grid the end cell's polynomial is
    /// extrapolated.
    pub fn value(&self, x: f64) -> f64 {
        let (i, a, b) = self.cell(x);
        let h = self.grid.step();
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.curvature[i] + (b * b * b - b) * self.curvature[i + 1]) * h * h / 6.0
    }

    /// `dV/dx` of the interpolant.
    pub fn derivative(&self, x: f64) -> f64 {
        let (i, a, b) = self.cell(x);
        let h = self.grid.step();
        (self.values[i + 1] - self.values[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * self.curvature[i]
            + (3.0 * b * b - 1.0) / 6.0 * h * self.curvature[i + 1]
    }

    /// `d²V/dx²` of the interpolant (identically zero for linear profiles).
    pub fn second_derivative(&self, x: f64) -> f64 {
        let (i, a, b) = self.cell(x);
        a * self.curvature[i] + b * self.curvature[i + 1]
    }

    /// Resamples onto another grid using this profile's interpolant.
    pub fn resample(&self, grid: UniformGrid) -> Result<Self> {
        Self::from_fn(grid, self.interpolation, |x| self.value(x))
    }

    /// Reads a two-column CSV (`x,V`) with a `# units: <length>,<energy>`
    /// comment line and converts it to natural units.
    pub fn load_csv(path: impl AsRef<Path>, interpolation: Interpolation) -> Result<Self> {
        let mut text = String::new();
        std::fs::File::open(path.as_ref())?.read_to_string(&mut text)?;
        Self::parse_csv(&text, interpolation)
    }

    pub fn parse_csv(text: &str, interpolation: Interpolation) -> Result<Self> {
        let (length_factor, energy_factor) = parse_units_comment(text)?;
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        if headers.len() != 2
            || !headers[0].eq_ignore_ascii_case("x")
            || !headers[1].eq_ignore_ascii_case("v")
        {
            return Err(Error::Parse(format!(
                "expected header `x,V`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let parse = |field: &str| {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: `{field}` is not a number", row + 1)))
            };
            xs.push(parse(&record[0])? * length_factor);
            vs.push(parse(&record[1])? * energy_factor);
        }
        Self::from_samples(&xs, vs, interpolation)
    }

    /// Writes `x,V` in natural units with a units header.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut writer = writer;
        writeln!(writer, "# units: natural,natural")?;
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["x", "V"])?;
        for (x, v) in self.grid.points().zip(&self.values) {
            csv.write_record([format_number(x), format_number(*v)])?;
        }
        csv.flush()?;
        Ok(())
    }
}

pub(crate) fn parse_units_comment(text: &str) -> Result<(f64, f64)> {
    let line = text
        .lines()
        .map(str::trim)
        .filter(|l| l.starts_with('#'))
        .find_map(|l| l.trim_start_matches('#').trim().strip_prefix("units:"))
        .ok_or_else(|| Error::Parse("missing `# units: <length>,<energy>` header line".into()))?;
    let mut parts = line.split(',');
    let (Some(length), Some(energy), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(Error::Parse(format!("malformed units line `{line}`")));
    };
    let length_factor = parse_length_unit(length)
        .ok_or_else(|| Error::Parse(format!("unknown length unit `{}`", length.trim())))?;
    let energy_factor = parse_energy_unit(energy)
        .ok_or_else(|| Error::Parse(format!("unknown energy unit `{}`", energy.trim())))?;
    Ok((length_factor, energy_factor))
}

/// Second derivatives of the natural cubic spline through uniform samples.
fn natural_spline_curvature(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // interior rows: M[i-1] + 4 M[i] + M[i+1] = 6 Δ²y / h²
    let interior = n - 2;
    let mut c_prime = vec![0.0; interior];
    let mut d_prime = vec![0.0; interior];
    for k in 0..interior {
        let i = k + 1;
        let rhs = 6.0 * (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h);
        if k == 0 {
            c_prime[0] = 1.0 / 4.0;
            d_prime[0] = rhs / 4.0;
        } else {
            let denom = 4.0 - c_prime[k - 1];
            c_prime[k] = 1.0 / denom;
            d_prime[k] = (rhs - d_prime[k - 1]) / denom;
        }
    }
    m[interior] = d_prime[interior - 1];
    for k in (0..interior - 1).rev() {
        m[k + 1] = d_prime[k] - c_prime[k] * m[k + 2];
    }
    m
}

/// Named analytic potential shapes, in natural units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialFamily {
    Constant {
        value: f64,
    },
    /// `offset + slope·x`
    Ramp {
        slope: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `height·exp(−(x − center)²/(2·width²))`
    GaussianBump {
        height: f64,
        #[serde(default)]
        center: f64,
        width: f64,
    },
    /// `height` on `[left, right]`, zero elsewhere.
    SquareBarrier {
        height: f64,
        left: f64,
        right: f64,
    },
    /// `stiffness·(x − center)²/2`
    Harmonic {
        stiffness: f64,
        #[serde(default)]
        center: f64,
    },
    /// `−coupling/r + l(l+1)/(2 m r²)` on `r > 0`; `coupling` defaults to α.
    CoulombRadialEffective {
        #[serde(default = "default_coupling")]
        coupling: f64,
        #[serde(default)]
        angular_momentum: u32,
        #[serde(default = "default_mass")]
        mass: f64,
    },
}

fn default_coupling() -> f64 {
    FINE_STRUCTURE
}
fn default_mass() -> f64 {
    1.0
}

impl PotentialFamily {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match *self {
            PotentialFamily::GaussianBump { width, .. } if !(width > 0.0) => {
                bad(format!("gaussian_bump width must be positive, got {width}"))
            }
            PotentialFamily::SquareBarrier { left, right, .. } if !(right > left) => {
                bad(format!("square_barrier needs left < right, got [{left}, {right}]"))
            }
            PotentialFamily::CoulombRadialEffective { mass, .. } if !(mass > 0.0) => {
                bad(format!("coulomb_radial_effective mass must be positive, got {mass}"))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PotentialFamily::Constant { value } => value,
            PotentialFamily::Ramp { slope, offset } => offset + slope * x,
            PotentialFamily::GaussianBump { height, center, width } => {
                height * (-(x - center).powi(2) / (2.0 * width * width)).exp()
            }
            PotentialFamily::SquareBarrier { height, left, right } => {
                if (left..=right).contains(&x) {
                    height
                } else {
                    0.0
                }
            }
            PotentialFamily::Harmonic { stiffness, center } => 0.5 * stiffness * (x - center).powi(2),
            PotentialFamily::CoulombRadialEffective {
                coupling,
                angular_momentum,
                mass,
            } => {
                let l = angular_momentum as f64;
                -coupling / x + l * (l + 1.0) / (2.0 * mass * x * x)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> UniformGrid {
        UniformGrid::spanning(-3.0, 3.0, n).unwrap()
    }

    #[test]
    fn spline_reproduces_nodes_and_is_smooth() {
        let g = grid(61);
        let p = PotentialProfile::from_fn(g, Interpolation::CubicSpline, |x| x.sin()).unwrap();
        for (i, x) in g.points().enumerate() {
            assert!((p.value(x) - p.values()[i]).abs() < 1e-14);
        }
        // interior accuracy of value and derivatives
        for x in [-1.23, 0.0, 0.77, 1.5] {
            assert!((p.value(x) - x.sin()).abs() < 1e-5);
            assert!((p.derivative(x) - x.cos()).abs() < 1e-4);
            assert!((p.second_derivative(x) + x.sin()).abs() < 1e-3);
        }
    }

    #[test]
    fn spline_second_derivative_converges_quadratically() {
        let err = |n| {
            let p = PotentialProfile::from_fn(grid(n), Interpolation::CubicSpline, |x| (-x * x).exp()).unwrap();
            let x = 0.3;
            (p.second_derivative(x) - (4.0 * x * x - 2.0) * (-x * x).exp()).abs()
        };
        let ratio = err(301) / err(601);
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn linear_profile_has_zero_curvature() {
        let p = PotentialProfile::from_fn(grid(7), Interpolation::Linear, |x| x * x).unwrap();
        assert_eq!(p.second_derivative(0.4), 0.0);
        // slope of the cell [0, 1]
        assert!((p.derivative(0.5) - 1.0).abs() < 1e-12);
        assert!((p.value(0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite_values() {
        let err = PotentialProfile::new(grid(3), vec![0.0, f64::INFINITY, 0.0], Interpolation::Linear);
        assert!(err.is_err());
        assert!(PotentialProfile::new(grid(3), vec![0.0, 1.0], Interpolation::Linear).is_err());
    }

    #[test]
    fn csv_round_trip_with_units() {
        let text = "# units: nm,eV\nx,V\n0.0,1.0\n0.5,2.0\n1.0,3.0\n";
        let p = PotentialProfile::parse_csv(text, Interpolation::Linear).unwrap();
        let nm = parse_length_unit("nm").unwrap();
        let ev = parse_energy_unit("eV").unwrap();
        assert!((p.grid().end() - nm).abs() < 1e-9 * nm);
        assert!((p.values()[2] - 3.0 * ev).abs() < 1e-18);

        let mut out = Vec::new();
        p.write_csv(&mut out).unwrap();
        let back = PotentialProfile::parse_csv(std::str::from_utf8(&out).unwrap(), Interpolation::Linear).unwrap();
        for (a, b) in back.values().iter().zip(p.values()) {
            assert!((a - b).abs() <= 1e-15 * b.abs());
        }
    }

    #[test]
    fn csv_errors() {
        assert!(PotentialProfile::parse_csv("x,V\n0,1\n1,2\n", Interpolation::Linear).is_err());
        assert!(PotentialProfile::parse_csv("# units: m,parsec\nx,V\n0,1\n1,2\n", Interpolation::Linear).is_err());
        assert!(PotentialProfile::parse_csv("# units: m,eV\nx,V\n0,1\n1,oops\n", Interpolation::Linear).is_err());
        assert!(PotentialProfile::parse_csv("# units: m,eV\nx,V\n0,1\n1,2\n3,2\n", Interpolation::Linear).is_err());
    }

    #[test]
    fn families_evaluate() {
        let bump = PotentialFamily::GaussianBump { height: 2.0, center: 1.0, width: 0.5 };
        assert_eq!(bump.eval(1.0), 2.0);
        let barrier = PotentialFamily::SquareBarrier { height: 2.0, left: 0.0, right: 1.0 };
        assert_eq!(barrier.eval(0.5), 2.0);
        assert_eq!(barrier.eval(1.5), 0.0);
        let coulomb = PotentialFamily::CoulombRadialEffective { coupling: 1.0, angular_momentum: 1, mass: 1.0 };
        assert!((coulomb.eval(2.0) - (-0.5 + 0.25)).abs() < 1e-15);
        assert!(PotentialFamily::GaussianBump { height: 1.0, center: 0.0, width: 0.0 }.validate().is_err());
    }
}
