//! Kernels on the unit sphere S^{n-1} and their norm functionals.
//!
//! A kernel is a homogeneous-degree-zero function: it is determined by its
//! restriction to the sphere and extended to R^n \ {0} by
//! `Omega(x) = Omega(x/|x|)`. This module provides
//!
//! * quadrature grids on S^0, S^1 and S^2 (`SphereGrid`),
//! * a small zoo of closed-form and tabulated kernels (`Kernel`),
//! * the norm functionals `l1_norm`, `llogl_norm` (`integral of
//!   |Omega| log(e + |Omega|)`) and the weak-type constant
//!   `weak_type_constant` = `||Omega||_{LlogL} + integral of
//!   |Omega| (1 + log+ (|Omega| / ||Omega||_1))`,
//! * the rotational L1 modulus of continuity and its Dini integral,
//! * threshold and parity splits of a kernel.
//!
//! Conventions: S^0 = {+1, -1} carries counting measure (total 2), so the
//! 1-D code paths exercise the same formulas as higher dimensions. Kernel
//! ingestion takes absolute values; only the odd part produced by
//! `parity_split` carries signs.

use std::sync::Arc;

use crate::error::{Error, Result};

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Total surface measure of S^{n-1}: 2 (counting), 2*pi, 4*pi.
pub fn surface_measure(dim: usize) -> Result<f64> {
    match dim {
        1 => Ok(2.0),
        2 => Ok(TAU),
        3 => Ok(2.0 * TAU),
        _ => Err(Error::UnsupportedDimension(dim)),
    }
}

/// Quadrature nodes and positive weights on S^{n-1}, n in {1, 2, 3}.
///
/// Nodes are stored as unit vectors padded to three components. All
/// constructions are antipodally symmetric: for n = 2 an odd requested
/// resolution is rounded up to the next even count, and the n = 3
/// latitude-band grid uses an even azimuthal count per band.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    dim: usize,
    nodes: Vec<[f64; 3]>,
    weights: Vec<f64>,
    /// For n = 2: node k sits at angle 2*pi*k / circle_res.
    circle_res: Option<usize>,
}

impl SphereGrid {
    /// Builds the standard grid for the dimension.
    ///
    /// * n = 1: the two atoms {+1, -1}, weight 1 each (resolution ignored).
    /// * n = 2: `resolution` equally spaced angles, weight 2*pi/resolution.
    /// * n = 3: equal-area latitude bands targeting ~`resolution` nodes,
    ///   weights summing to 4*pi exactly by construction.
    pub fn new(dim: usize, resolution: usize) -> Result<Self> {
        match dim {
            1 => Ok(SphereGrid {
                dim,
                nodes: vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
                weights: vec![1.0, 1.0],
                circle_res: None,
            }),
            2 => {
                if resolution < 2 {
                    return Err(Error::InvalidGrid(format!(
                        "circle grid needs resolution >= 2, got {resolution}"
                    )));
                }
                // Antipodal symmetry on the circle needs an even node count.
                let res = resolution + resolution % 2;
                let w = TAU / res as f64;
                let nodes = (0..res)
                    .map(|k| {
                        let th = TAU * k as f64 / res as f64;
                        [th.cos(), th.sin(), 0.0]
                    })
                    .collect();
                Ok(SphereGrid {
                    dim,
                    nodes,
                    weights: vec![w; res],
                    circle_res: Some(res),
                })
            }
            3 => {
                if resolution < 2 {
                    return Err(Error::InvalidGrid(format!(
                        "sphere grid needs resolution >= 2, got {resolution}"
                    )));
                }
                let bands = ((2.0 * resolution as f64 / std::f64::consts::PI).sqrt().round()
                    as usize)
                    .max(2);
                let mut nodes = Vec::new();
                let mut weights = Vec::new();
                let band_area = 2.0 * TAU / bands as f64;
                for j in 0..bands {
                    let z = -1.0 + (2.0 * j as f64 + 1.0) / bands as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let m = 2 * ((bands as f64 * rho).round() as usize).max(1);
                    let w = band_area / m as f64;
                    for k in 0..m {
                        let phi = TAU * k as f64 / m as f64;
                        nodes.push([rho * phi.cos(), rho * phi.sin(), z]);
                        weights.push(w);
                    }
                }
                Ok(SphereGrid {
                    dim,
                    nodes,
                    weights,
                    circle_res: None,
                })
            }
            _ => Err(Error::UnsupportedDimension(dim)),
        }
    }

    /// Builds a grid from explicit nodes and weights, validating unit norms,
    /// weight positivity and the total surface measure.
    pub fn from_parts(dim: usize, nodes: Vec<[f64; 3]>, weights: Vec<f64>) -> Result<Self> {
        let total = surface_measure(dim)?;
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(Error::InvalidGrid("node/weight length mismatch".into()));
        }
        for v in &nodes {
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidGrid(format!("node norm {norm} is not 1")));
            }
        }
        if weights.iter().any(|&w| w <= 0.0 || !w.is_finite()) {
            return Err(Error::InvalidGrid("nonpositive weight".into()));
        }
        let sum: f64 = weights.iter().sum();
        if ((sum - total) / total).abs() > 1e-9 {
            return Err(Error::InvalidGrid(format!(
                "weights sum to {sum}, expected {total}"
            )));
        }
        Ok(SphereGrid {
            dim,
            nodes,
            weights,
            circle_res: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Index map i -> j with node_j = -node_i, or an error if the grid is
    /// not antipodally symmetric.
    pub fn antipodal_map(&self) -> Result<Vec<usize>> {
        if self.dim == 1 {
            return Ok(vec![1, 0]);
        }
        if let Some(res) = self.circle_res {
            // Equally spaced circle: the antipode of slot k is slot k + res/2.
            let map: Vec<usize> = (0..res).map(|k| (k + res / 2) % res).collect();
            return Ok(map);
        }
        let mut map = vec![usize::MAX; self.nodes.len()];
        for (i, a) in self.nodes.iter().enumerate() {
            let mut found = None;
            for (j, b) in self.nodes.iter().enumerate() {
                if (a[0] + b[0]).abs() < 1e-9
                    && (a[1] + b[1]).abs() < 1e-9
                    && (a[2] + b[2]).abs() < 1e-9
                {
                    found = Some(j);
                    break;
                }
            }
            match found {
                Some(j) => map[i] = j,
                None => {
                    return Err(Error::InvalidGrid(
                        "grid is not antipodally symmetric".into(),
                    ))
                }
            }
        }
        Ok(map)
    }
}

/// The `loglog` zoo profile diverges at the pole; quadrature nodes that land
/// exactly there are evaluated at this angular floor instead.
const LOGLOG_ANGLE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
enum KernelForm {
    /// Omega == c.
    Const(f64),
    /// |cos theta|^a on S^1, a in [0, 1).
    AbsCosPow(f64),
    /// 1 / (theta * ln(e + 1/theta)^p) near theta = 0 on S^1, symmetrized,
    /// p > 1. Angular distance floored at `LOGLOG_ANGLE_FLOOR`.
    LogLog(f64),
    /// sum_{k=1..K} k^{-2} (1 + sin(2^{2^k} theta)) on S^1.
    Lacunary(u32),
    /// Two atom values on S^0 (directions +1 / -1).
    Atoms(f64, f64),
    /// Nearest-angle lookup table on S^1; angles sorted in [0, 2*pi).
    AngleTable { angles: Vec<f64>, values: Vec<f64> },
    /// Per-node samples tied to a quadrature grid; evaluation at arbitrary
    /// directions uses the nearest node.
    NodeTable {
        grid: Arc<SphereGrid>,
        values: Vec<f64>,
    },
}

/// A kernel on S^{n-1}, extended to R^n \ {0} by homogeneity of degree zero.
///
/// Public constructors normalize to nonnegative values; the signed odd part
/// of `parity_split` is the only exception.
#[derive(Debug, Clone)]
pub struct Kernel {
    dim: usize,
    form: KernelForm,
}

impl Kernel {
    pub fn constant(dim: usize, c: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        Ok(Kernel {
            dim,
            form: KernelForm::Const(c.abs()),
        })
    }

    /// |cos theta|^a on the circle, a in [0, 1). a = 0 is the constant 1.
    pub fn abs_cos_pow(a: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&a) {
            return Err(Error::Domain(format!("abscos exponent {a} outside [0,1)")));
        }
        Ok(Kernel {
            dim: 2,
            form: KernelForm::AbsCosPow(a),
        })
    }

    /// Unbounded L^1 profile on the circle, integrable for p > 1 and in
    /// L log L only for p > 2.
    pub fn log_log(p: f64) -> Result<Self> {
        if p <= 1.0 {
            return Err(Error::Domain(format!("loglog exponent {p} must be > 1")));
        }
        Ok(Kernel {
            dim: 2,
            form: KernelForm::LogLog(p),
        })
    }

    /// Lacunary oscillation: sum_{k=1..terms} k^{-2} (1 + sin(2^{2^k} theta)).
    pub fn lacunary(terms: u32) -> Result<Self> {
        if terms == 0 || terms > 5 {
            return Err(Error::Domain(format!(
                "lacunary term count {terms} outside 1..=5"
            )));
        }
        Ok(Kernel {
            dim: 2,
            form: KernelForm::Lacunary(terms),
        })
    }

    /// Two-atom kernel on S^0.
    pub fn atoms(plus: f64, minus: f64) -> Self {
        Kernel {
            dim: 1,
            form: KernelForm::Atoms(plus.abs(), minus.abs()),
        }
    }

    /// Nearest-angle table on S^1 from (angle, value) pairs.
    pub fn angle_table(mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Parse("empty angle table".into()));
        }
        for p in &mut pairs {
            p.0 = p.0.rem_euclid(TAU);
            p.1 = p.1.abs();
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (angles, values) = pairs.into_iter().unzip();
        Ok(Kernel {
            dim: 2,
            form: KernelForm::AngleTable { angles, values },
        })
    }

    /// Per-node samples on `grid`; values are clamped to absolute values.
    pub fn from_node_values(grid: Arc<SphereGrid>, values: Vec<f64>) -> Result<Self> {
        let k = Self::from_node_values_signed(grid, values)?;
        let KernelForm::NodeTable { grid, values } = k.form else {
            unreachable!()
        };
        let values = values.into_iter().map(f64::abs).collect();
        Ok(Kernel {
            dim: k.dim,
            form: KernelForm::NodeTable { grid, values },
        })
    }

    /// Per-node samples without the nonnegativity normalization. Split
    /// outputs (the odd part in particular) are built through this path.
    pub(crate) fn from_node_values_signed(
        grid: Arc<SphereGrid>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} node values for a {}-node grid",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite kernel sample".into()));
        }
        Ok(Kernel {
            dim: grid.dim(),
            form: KernelForm::NodeTable { grid, values },
        })
    }

    /// Parses a zoo identifier: `const:c`, `abscos:a`, `loglog:p`,
    /// `lacunary:K`, `atoms:v1,v2`, `table:<path>` (CSV of angle,value rows).
    ///
    /// `dim` is the ambient dimension the kernel will be used in; identifiers
    /// with a fixed natural dimension reject a mismatch.
    pub fn from_zoo(id: &str, dim: usize) -> Result<Self> {
        let (name, arg) = match id.split_once(':') {
            Some((n, a)) => (n, a),
            None => (id, ""),
        };
        let parse_f64 = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad numeric argument {s:?} in kernel id {id:?}")))
        };
        let require_dim = |want: usize| -> Result<()> {
            if dim != want {
                Err(Error::DimensionMismatch {
                    expected: want,
                    got: dim,
                })
            } else {
                Ok(())
            }
        };
        match name {
            "const" => Kernel::constant(dim, parse_f64(arg)?),
            "abscos" => {
                require_dim(2)?;
                Kernel::abs_cos_pow(parse_f64(arg)?)
            }
            "loglog" => {
                require_dim(2)?;
                Kernel::log_log(parse_f64(arg)?)
            }
            "lacunary" => {
                require_dim(2)?;
                let k: u32 = arg
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad lacunary count in {id:?}")))?;
                Kernel::lacunary(k)
            }
            "atoms" => {
                require_dim(1)?;
                let (a, b) = arg
                    .split_once(',')
                    .ok_or_else(|| Error::Parse(format!("atoms needs v1,v2 in {id:?}")))?;
                Ok(Kernel::atoms(parse_f64(a)?, parse_f64(b)?))
            }
            "table" => {
                require_dim(2)?;
                let text = std::fs::read_to_string(arg.trim())?;
                let mut pairs = Vec::new();
                for (lineno, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let (a, v) = line.split_once(',').ok_or_else(|| {
                        Error::Parse(format!("table line {} is not angle,value", lineno + 1))
                    })?;
                    pairs.push((parse_f64(a)?, parse_f64(v)?));
                }
                Kernel::angle_table(pairs)
            }
            _ => Err(Error::Parse(format!("unknown kernel id {id:?}"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Some(c) when the kernel is a constant; direction-independent
    /// evaluation lets hot loops skip the normalization.
    pub fn const_value(&self) -> Option<f64> {
        match self.form {
            KernelForm::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Evaluates at the circle angle theta (n = 2 forms only).
    fn eval_angle(&self, theta: f64) -> f64 {
        match &self.form {
            KernelForm::Const(c) => *c,
            KernelForm::AbsCosPow(a) => pow_abs(theta.cos().abs(), *a),
            KernelForm::LogLog(p) => {
                let mut d = theta.rem_euclid(TAU);
                if d > std::f64::consts::PI {
                    d = TAU - d;
                }
                let d = d.max(LOGLOG_ANGLE_FLOOR);
                1.0 / (d * (std::f64::consts::E + 1.0 / d).ln().powf(*p))
            }
            KernelForm::Lacunary(terms) => {
                let mut acc = 0.0;
                for k in 1..=*terms {
                    let freq = 2f64.powi(1 << k);
                    acc += (1.0 + (freq * theta).sin()) / (k as f64 * k as f64);
                }
                acc
            }
            KernelForm::AngleTable { angles, values } => {
                let th = theta.rem_euclid(TAU);
                // Nearest angle on the circle.
                let idx = match angles.binary_search_by(|a| a.total_cmp(&th)) {
                    Ok(i) => i,
                    Err(i) => {
                        let prev = if i == 0 { angles.len() - 1 } else { i - 1 };
                        let next = i % angles.len();
                        let dp = circ_dist(angles[prev], th);
                        let dn = circ_dist(angles[next], th);
                        if dp <= dn {
                            prev
                        } else {
                            next
                        }
                    }
                };
                values[idx]
            }
            KernelForm::NodeTable { grid, values } => {
                if let Some(res) = grid.circle_res {
                    let slot = (theta.rem_euclid(TAU) / TAU * res as f64).round() as usize % res;
                    values[slot]
                } else {
                    self.eval_nearest_node(&[theta.cos(), theta.sin(), 0.0])
                }
            }
            KernelForm::Atoms(..) => unreachable!("atoms kernel evaluated by angle"),
        }
    }

    fn eval_nearest_node(&self, u: &[f64; 3]) -> f64 {
        let KernelForm::NodeTable { grid, values } = &self.form else {
            unreachable!()
        };
        let mut best = 0usize;
        let mut best_dot = f64::NEG_INFINITY;
        for (i, n) in grid.nodes().iter().enumerate() {
            let dot = n[0] * u[0] + n[1] * u[1] + n[2] * u[2];
            if dot > best_dot {
                best_dot = dot;
                best = i;
            }
        }
        values[best]
    }

    /// Evaluates on the unit circle from the components of a unit vector.
    #[inline]
    pub fn eval_unit2(&self, ux: f64, uy: f64) -> f64 {
        match &self.form {
            KernelForm::Const(c) => *c,
            KernelForm::AbsCosPow(a) => pow_abs(ux.abs(), *a),
            _ => self.eval_angle(uy.atan2(ux)),
        }
    }

    /// Evaluates on S^0: `positive` selects the +1 direction.
    #[inline]
    pub fn eval_unit1(&self, positive: bool) -> f64 {
        match &self.form {
            KernelForm::Const(c) => *c,
            KernelForm::Atoms(p, m) => {
                if positive {
                    *p
                } else {
                    *m
                }
            }
            KernelForm::NodeTable { grid, values } => {
                // S^0 grids store +1 first.
                debug_assert_eq!(grid.dim(), 1);
                if positive {
                    values[0]
                } else {
                    values[1]
                }
            }
            _ => unreachable!("circle kernel evaluated on S^0"),
        }
    }

    /// Evaluates `Omega(x/|x|)` for x in R^n \ {0}. Homogeneity of degree
    /// zero is automatic: only the direction of `x` matters.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let norm2: f64 = x.iter().map(|c| c * c).sum();
        if norm2 == 0.0 || !norm2.is_finite() {
            return Err(Error::Domain("kernel evaluated at 0 or a non-finite point".into()));
        }
        Ok(match self.dim {
            1 => self.eval_unit1(x[0] > 0.0),
            2 => {
                let inv = norm2.sqrt().recip();
                self.eval_unit2(x[0] * inv, x[1] * inv)
            }
            _ => {
                let inv = norm2.sqrt().recip();
                let u = [x[0] * inv, x[1] * inv, x[2] * inv];
                match &self.form {
                    KernelForm::Const(c) => *c,
                    KernelForm::NodeTable { .. } => self.eval_nearest_node(&u),
                    _ => unreachable!("form has no 3-D evaluation"),
                }
            }
        })
    }

    /// Samples the kernel at every grid node.
    pub fn node_values(&self, grid: &SphereGrid) -> Result<Vec<f64>> {
        if grid.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: grid.dim(),
            });
        }
        if let KernelForm::NodeTable { grid: own, values } = &self.form {
            // Fast path: the table is tied to this very grid.
            if std::ptr::eq(Arc::as_ptr(own), grid) {
                return Ok(values.clone());
            }
        }
        match self.dim {
            1 => Ok(vec![self.eval_unit1(true), self.eval_unit1(false)]),
            _ => grid
                .nodes()
                .iter()
                .map(|n| self.eval(&n[..self.dim]))
                .collect(),
        }
    }

    /// Max of |Omega| over the grid nodes.
    pub fn sup_on_grid(&self, grid: &SphereGrid) -> Result<f64> {
        Ok(self
            .node_values(grid)?
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs())))
    }
}

#[inline]
fn pow_abs(base: f64, a: f64) -> f64 {
    if a == 0.0 {
        1.0
    } else if a == 0.5 {
        base.sqrt()
    } else if a == 1.0 {
        base
    } else {
        base.powf(a)
    }
}

fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Quadrature value of `integral of |Omega| dsigma`.
pub fn l1_norm(kernel: &Kernel, grid: &SphereGrid) -> Result<f64> {
    let vals = kernel.node_values(grid)?;
    Ok(vals
        .iter()
        .zip(grid.weights())
        .map(|(v, w)| v.abs() * w)
        .sum())
}

/// Quadrature value of `integral of |Omega| log(e + |Omega|) dsigma`.
/// Always at least `l1_norm` of the same kernel.
pub fn llogl_norm(kernel: &Kernel, grid: &SphereGrid) -> Result<f64> {
    let vals = kernel.node_values(grid)?;
    Ok(vals
        .iter()
        .zip(grid.weights())
        .map(|(v, w)| {
            let a = v.abs();
            a * (std::f64::consts::E + a).ln() * w
        })
        .sum())
}

/// The weak (1,1) bound constant
/// `||Omega||_{LlogL} + integral of |Omega| (1 + log+(|Omega|/||Omega||_1))`,
/// with log+ t = max(0, log t) and log+(0) = 0.
///
/// Bounded by `3 (llogl_norm + 1)` and tends to 0 with the L log L norm.
pub fn weak_type_constant(kernel: &Kernel, grid: &SphereGrid) -> Result<f64> {
    let vals = kernel.node_values(grid)?;
    let l1: f64 = vals
        .iter()
        .zip(grid.weights())
        .map(|(v, w)| v.abs() * w)
        .sum();
    if l1 <= 0.0 {
        return Err(Error::DegenerateKernel);
    }
    let mut acc = 0.0;
    for (v, w) in vals.iter().zip(grid.weights()) {
        let a = v.abs();
        let llogl = a * (std::f64::consts::E + a).ln();
        let log_plus = if a > 0.0 { (a / l1).ln().max(0.0) } else { 0.0 };
        acc += w * (llogl + a * (1.0 + log_plus));
    }
    Ok(acc)
}

/// Rotational L1 modulus of continuity
/// `omega(delta) = sup_{||rho|| <= delta} integral of |Omega(rho theta) - Omega(theta)|`,
/// where `||rho||` is the largest chord a rotation moves a sphere point.
///
/// n = 2: rotations are sampled on the grid's own angular lattice (chord of
/// the rotation by phi is 2 sin(|phi|/2)), so tabulated kernels shift
/// exactly. n = 1: the identity is the only rotation with chord < 2; the
/// antipodal flip enters at delta = 2. n = 3 is unsupported.
pub fn dini_modulus(kernel: &Kernel, grid: &SphereGrid, delta: f64) -> Result<f64> {
    if grid.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            got: grid.dim(),
        });
    }
    if !(delta > 0.0 && delta <= 2.0) {
        return Err(Error::Domain(format!("rotation bound {delta} outside (0, 2]")));
    }
    match kernel.dim() {
        1 => {
            if delta < 2.0 {
                Ok(0.0)
            } else {
                let p = kernel.eval_unit1(true);
                let m = kernel.eval_unit1(false);
                Ok(2.0 * (p - m).abs())
            }
        }
        2 => {
            let res = grid
                .circle_res
                .ok_or_else(|| Error::InvalidGrid("circle grid required".into()))?;
            let vals = kernel.node_values(grid)?;
            let w = TAU / res as f64;
            let mut sup = 0.0f64;
            for shift in 1..res {
                let phi = TAU * shift as f64 / res as f64;
                let chord = 2.0 * (0.5 * phi.min(TAU - phi)).sin();
                if chord > delta + 1e-15 {
                    continue;
                }
                let mut acc = 0.0;
                for k in 0..res {
                    acc += (vals[(k + shift) % res] - vals[k]).abs();
                }
                sup = sup.max(acc * w);
            }
            Ok(sup)
        }
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// Numerical value of `integral from delta_min to 1 of omega(delta)/delta`
/// by midpoint quadrature in log(delta). Used to classify kernels as
/// Dini-convergent (value stabilizes as delta_min shrinks) or divergent.
pub fn dini_integral(kernel: &Kernel, grid: &SphereGrid, delta_min: f64) -> Result<f64> {
    if !(delta_min > 0.0 && delta_min < 1.0) {
        return Err(Error::Domain(format!(
            "dini cutoff {delta_min} outside (0, 1)"
        )));
    }
    let panels = 64usize;
    let lo = delta_min.ln();
    let du = -lo / panels as f64;
    let mut acc = 0.0;
    for j in 0..panels {
        let u = lo + (j as f64 + 0.5) * du;
        acc += dini_modulus(kernel, grid, u.exp())? * du;
    }
    Ok(acc)
}

/// A threshold split of a kernel: `big = Omega * [Omega >= tau]` (ties go to
/// big), `small = Omega * [Omega < tau]`, and the parity parts of `small`.
/// All four parts are tabulated on the grid used to build the split.
#[derive(Debug, Clone)]
pub struct KernelSplit {
    pub threshold: f64,
    pub big: Kernel,
    pub small: Kernel,
    pub small_even: Kernel,
    /// May take negative values.
    pub small_odd: Kernel,
}

/// Splits by the superlevel set {Omega >= tau} of the kernel on the grid.
pub fn level_set_split(kernel: &Kernel, grid: &Arc<SphereGrid>, tau: f64) -> Result<KernelSplit> {
    if tau < 0.0 || !tau.is_finite() {
        return Err(Error::Domain(format!("threshold {tau} must be >= 0")));
    }
    let vals = kernel.node_values(grid)?;
    let mut big = vec![0.0; vals.len()];
    let mut small = vec![0.0; vals.len()];
    for (i, v) in vals.iter().enumerate() {
        if *v >= tau {
            big[i] = *v;
        } else {
            small[i] = *v;
        }
    }
    let small_k = Kernel::from_node_values_signed(grid.clone(), small)?;
    let (small_even, small_odd) = parity_split(&small_k, grid)?;
    Ok(KernelSplit {
        threshold: tau,
        big: Kernel::from_node_values_signed(grid.clone(), big)?,
        small: small_k,
        small_even,
        small_odd,
    })
}

/// Even/odd decomposition `even = (Omega(theta) + Omega(-theta))/2`,
/// `odd = (Omega(theta) - Omega(-theta))/2`, tabulated on the grid.
/// Requires an antipodally symmetric grid. Sup norms of both parts are
/// bounded by the sup of the input.
pub fn parity_split(kernel: &Kernel, grid: &Arc<SphereGrid>) -> Result<(Kernel, Kernel)> {
    let map = grid.antipodal_map()?;
    let vals = kernel.node_values(grid)?;
    let mut even = vec![0.0; vals.len()];
    let mut odd = vec![0.0; vals.len()];
    for i in 0..vals.len() {
        let v = vals[i];
        let v_anti = vals[map[i]];
        even[i] = 0.5 * (v + v_anti);
        odd[i] = 0.5 * (v - v_anti);
    }
    Ok((
        Kernel::from_node_values_signed(grid.clone(), even)?,
        Kernel::from_node_values_signed(grid.clone(), odd)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn circle(res: usize) -> SphereGrid {
        SphereGrid::new(2, res).unwrap()
    }

    #[test]
    fn sphere_grid_atoms() {
        let g = SphereGrid::new(1, 17).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.weights(), &[1.0, 1.0]);
        assert_eq!(g.total_weight(), 2.0);
    }

    #[test]
    fn sphere_grid_circle_weights() {
        let g = circle(4);
        assert_eq!(g.len(), 4);
        for &w in g.weights() {
            assert_relative_eq!(w, std::f64::consts::FRAC_PI_2, max_relative = 1e-15);
        }
        assert_relative_eq!(g.total_weight(), TAU, max_relative = 1e-12);
    }

    #[test]
    fn sphere_grid_s2_total_area() {
        let g = SphereGrid::new(3, 1000).unwrap();
        assert_relative_eq!(g.total_weight(), 2.0 * TAU, max_relative = 1e-9);
        for n in g.nodes() {
            let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        assert!(g.antipodal_map().is_ok());
    }

    #[test]
    fn sphere_grid_rejects_dimension() {
        assert!(matches!(
            SphereGrid::new(4, 10),
            Err(Error::UnsupportedDimension(4))
        ));
    }

    #[test]
    fn l1_norm_examples() {
        let g = circle(256);
        let one = Kernel::constant(2, 1.0).unwrap();
        assert_relative_eq!(l1_norm(&one, &g).unwrap(), TAU, max_relative = 1e-12);

        let g0 = SphereGrid::new(1, 2).unwrap();
        let atoms = Kernel::atoms(3.0, 1.0);
        assert_eq!(l1_norm(&atoms, &g0).unwrap(), 4.0);

        // integral of |cos| over the circle is 4.
        let abscos = Kernel::abs_cos_pow(1.0 - 1e-12).unwrap();
        let g = circle(4096);
        assert_relative_eq!(l1_norm(&abscos, &g).unwrap(), 4.0, max_relative = 1e-4);
    }

    #[test]
    fn llogl_examples() {
        let g = circle(128);
        let zero = Kernel::constant(2, 0.0).unwrap();
        assert_eq!(llogl_norm(&zero, &g).unwrap(), 0.0);

        let one = Kernel::constant(2, 1.0).unwrap();
        let expect = TAU * (std::f64::consts::E + 1.0).ln();
        assert_relative_eq!(llogl_norm(&one, &g).unwrap(), expect, max_relative = 1e-12);

        let g0 = SphereGrid::new(1, 2).unwrap();
        let atoms = Kernel::atoms(1.0, 1.0);
        assert_relative_eq!(
            llogl_norm(&atoms, &g0).unwrap(),
            2.0 * (std::f64::consts::E + 1.0).ln(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn weak_constant_examples() {
        let g = circle(128);
        let one = Kernel::constant(2, 1.0).unwrap();
        // log+(1/(2*pi)) = 0, so the value is llogl + 2*pi.
        let expect = TAU * (std::f64::consts::E + 1.0).ln() + TAU;
        assert_relative_eq!(
            weak_type_constant(&one, &g).unwrap(),
            expect,
            max_relative = 1e-12
        );

        let g0 = SphereGrid::new(1, 2).unwrap();
        let atoms = Kernel::atoms(1.0, 1.0);
        let expect = 2.0 * (std::f64::consts::E + 1.0).ln() + 2.0;
        assert_relative_eq!(
            weak_type_constant(&atoms, &g0).unwrap(),
            expect,
            max_relative = 1e-15
        );

        let zero = Kernel::constant(2, 0.0).unwrap();
        assert!(matches!(
            weak_type_constant(&zero, &g),
            Err(Error::DegenerateKernel)
        ));
    }

    #[test]
    fn weak_constant_bounded_by_llogl() {
        let g = circle(512);
        let g0 = SphereGrid::new(1, 2).unwrap();
        let zoo: Vec<(Kernel, &SphereGrid)> = vec![
            (Kernel::constant(2, 1.0).unwrap(), &g),
            (Kernel::constant(2, 0.03).unwrap(), &g),
            (Kernel::abs_cos_pow(0.5).unwrap(), &g),
            (Kernel::log_log(1.5).unwrap(), &g),
            (Kernel::log_log(3.0).unwrap(), &g),
            (Kernel::lacunary(3).unwrap(), &g),
            (Kernel::atoms(3.0, 1.0), &g0),
        ];
        for (k, grid) in &zoo {
            let c = weak_type_constant(k, grid).unwrap();
            let llogl = llogl_norm(k, grid).unwrap();
            let l1 = l1_norm(k, grid).unwrap();
            assert!(l1 <= llogl + 1e-12);
            assert!(c <= 3.0 * (llogl + 1.0) + 1e-9, "c={c} llogl={llogl}");
        }
    }

    #[test]
    fn dini_modulus_constant_kernel_vanishes() {
        let g = circle(360);
        let one = Kernel::constant(2, 1.0).unwrap();
        assert_eq!(dini_modulus(&one, &g, 0.7).unwrap(), 0.0);
        assert_eq!(dini_modulus(&one, &g, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn dini_modulus_cosine_closed_form() {
        // For Omega = 1 + cos(theta), the L1 increment of a rotation by phi
        // is 8 sin(phi/2), and the sup over admissible rotations is attained
        // at the largest of them.
        let res = 720;
        let g = Arc::new(circle(res));
        let vals: Vec<f64> = (0..res)
            .map(|k| 1.0 + (TAU * k as f64 / res as f64).cos())
            .collect();
        let k = Kernel::from_node_values(g.clone(), vals).unwrap();
        let phi0 = TAU * 30.0 / res as f64;
        let delta = 2.0 * (phi0 / 2.0).sin();
        let expect = 8.0 * (phi0 / 2.0).sin();
        assert_relative_eq!(
            dini_modulus(&k, &g, delta).unwrap(),
            expect,
            max_relative = 1e-3
        );
    }

    #[test]
    fn dini_modulus_monotone_in_delta() {
        let g = circle(240);
        let k = Kernel::abs_cos_pow(0.5).unwrap();
        let mut prev = 0.0;
        for i in 1..=18 {
            let delta = i as f64 / 9.0;
            let w = dini_modulus(&k, &g, delta).unwrap();
            assert!(w >= prev - 1e-14);
            prev = w;
        }
    }

    #[test]
    fn dini_modulus_s0_and_s2() {
        let g0 = SphereGrid::new(1, 2).unwrap();
        let atoms = Kernel::atoms(3.0, 1.0);
        assert_eq!(dini_modulus(&atoms, &g0, 1.0).unwrap(), 0.0);
        assert_eq!(dini_modulus(&atoms, &g0, 2.0).unwrap(), 4.0);

        let g2 = SphereGrid::new(3, 200).unwrap();
        let c = Kernel::constant(3, 1.0).unwrap();
        assert!(matches!(
            dini_modulus(&c, &g2, 1.0),
            Err(Error::UnsupportedDimension(3))
        ));
    }

    #[test]
    fn dini_integral_stable_for_dini_kernel() {
        // omega(delta) ~ 4 delta for 1 + cos(theta), so the integrand is
        // bounded and the integral is insensitive to the cutoff.
        let res = 1440;
        let g = Arc::new(circle(res));
        let vals: Vec<f64> = (0..res)
            .map(|k| 1.0 + (TAU * k as f64 / res as f64).cos())
            .collect();
        let k = Kernel::from_node_values(g.clone(), vals).unwrap();
        let a = dini_integral(&k, &g, 1e-3).unwrap();
        let b = dini_integral(&k, &g, 5e-4).unwrap();
        assert!(a.is_finite() && a > 0.0);
        assert!((a - b).abs() / a < 0.01, "a={a} b={b}");

        let one = Kernel::constant(2, 1.0).unwrap();
        assert_eq!(dini_integral(&one, &g, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn level_set_split_atoms() {
        let g = Arc::new(SphereGrid::new(1, 2).unwrap());
        let k = Kernel::atoms(3.0, 1.0);
        let s = level_set_split(&k, &g, 2.0).unwrap();
        assert_eq!(s.big.node_values(&g).unwrap(), vec![3.0, 0.0]);
        assert_eq!(s.small.node_values(&g).unwrap(), vec![0.0, 1.0]);

        let s0 = level_set_split(&k, &g, 0.0).unwrap();
        assert_eq!(s0.big.node_values(&g).unwrap(), vec![3.0, 1.0]);
        assert_eq!(s0.small.node_values(&g).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn level_set_split_invariants_random_table() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let g = Arc::new(circle(128));
        let vals: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(0.0..5.0)).collect();
        let k = Kernel::from_node_values(g.clone(), vals.clone()).unwrap();
        let mut sorted = vals.clone();
        sorted.sort_by(f64::total_cmp);
        let tau = sorted[sorted.len() / 2];
        let s = level_set_split(&k, &g, tau).unwrap();

        let big = s.big.node_values(&g).unwrap();
        let small = s.small.node_values(&g).unwrap();
        let even = s.small_even.node_values(&g).unwrap();
        let odd = s.small_odd.node_values(&g).unwrap();
        let map = g.antipodal_map().unwrap();
        let sup_small = small.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..g.len() {
            assert_eq!(big[i] + small[i], vals[i]);
            assert!(small[i] < tau);
            assert!((even[i] + odd[i] - small[i]).abs() <= 1e-15);
            assert!((even[map[i]] - even[i]).abs() <= 1e-15);
            assert!((odd[map[i]] + odd[i]).abs() <= 1e-15);
            assert!(even[i].abs() <= sup_small + 1e-15);
            assert!(odd[i].abs() <= sup_small + 1e-15);
        }
        assert!(sup_small < tau);
    }

    #[test]
    fn parity_split_sine_example() {
        let res = 360;
        let g = Arc::new(circle(res));
        let vals: Vec<f64> = (0..res)
            .map(|k| 1.0 + (TAU * k as f64 / res as f64).sin())
            .collect();
        let k = Kernel::from_node_values(g.clone(), vals).unwrap();
        let (even, odd) = parity_split(&k, &g).unwrap();
        let ev = even.node_values(&g).unwrap();
        let ov = odd.node_values(&g).unwrap();
        for (i, (e, o)) in ev.iter().zip(&ov).enumerate() {
            let th = TAU * i as f64 / res as f64;
            assert_relative_eq!(*e, 1.0, epsilon = 1e-12);
            assert_relative_eq!(*o, th.sin(), epsilon = 1e-12);
        }
    }

    #[test]
    fn parity_split_reconstructs_exactly() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let g = Arc::new(circle(64));
        let vals: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(0.0..3.0)).collect();
        let k = Kernel::from_node_values(g.clone(), vals.clone()).unwrap();
        let (even, odd) = parity_split(&k, &g).unwrap();
        let ev = even.node_values(&g).unwrap();
        let ov = odd.node_values(&g).unwrap();
        for i in 0..g.len() {
            assert!((ev[i] + ov[i] - vals[i]).abs() <= 1e-15);
        }
        // An even kernel has vanishing odd part.
        let sym: Vec<f64> = (0..g.len())
            .map(|i| (TAU * i as f64 / g.len() as f64).cos().abs())
            .collect();
        let ks = Kernel::from_node_values(g.clone(), sym).unwrap();
        let (_, odd) = parity_split(&ks, &g).unwrap();
        assert!(odd
            .node_values(&g)
            .unwrap()
            .iter()
            .all(|v| v.abs() <= 1e-15));
    }

    #[test]
    fn parity_split_rejects_asymmetric_grid() {
        let nodes = vec![
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [-0.6, 0.8, 0.0],
            [0.0, -1.0, 0.0],
        ];
        let w = TAU / 4.0;
        let g = Arc::new(SphereGrid::from_parts(2, nodes, vec![w; 4]).unwrap());
        let k = Kernel::constant(2, 1.0).unwrap();
        assert!(matches!(
            parity_split(&k, &g),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn quadrature_refinement_shrinks() {
        let kernels = vec![
            Kernel::abs_cos_pow(0.5).unwrap(),
            Kernel::log_log(1.5).unwrap(),
            Kernel::lacunary(3).unwrap(),
        ];
        // Base resolutions chosen so the highest oscillation is resolved.
        for (k, base) in kernels.iter().zip([512usize, 2048, 8192]) {
            let l_r = l1_norm(k, &circle(base)).unwrap();
            let l_2r = l1_norm(k, &circle(2 * base)).unwrap();
            let l_4r = l1_norm(k, &circle(4 * base)).unwrap();
            let d1 = ((l_2r - l_r) / l_2r).abs();
            let d2 = ((l_4r - l_2r) / l_4r).abs();
            assert!(d2 <= d1 + 1e-12, "refinement not shrinking: {d1} {d2}");
        }
    }

    #[test]
    fn quasi_triangle_inequality() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let g = Arc::new(circle(96));
        for _ in 0..100 {
            let a: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(0.0..8.0)).collect();
            let b: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(0.0..8.0)).collect();
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let ka = Kernel::from_node_values(g.clone(), a).unwrap();
            let kb = Kernel::from_node_values(g.clone(), b).unwrap();
            let ks = Kernel::from_node_values(g.clone(), sum).unwrap();
            let lhs = llogl_norm(&ks, &g).unwrap();
            let rhs = 4.0 * (llogl_norm(&ka, &g).unwrap() + llogl_norm(&kb, &g).unwrap());
            assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn weak_constant_scaling_probe() {
        let g = circle(512);
        let base = Kernel::abs_cos_pow(0.5).unwrap();
        let vals = base.node_values(&g).unwrap();
        let g = Arc::new(g);
        let mut prev = f64::NEG_INFINITY;
        let mut first = 0.0;
        let mut last = 0.0;
        for k in (0..=20).rev() {
            let c = 2f64.powi(-k);
            let scaled: Vec<f64> = vals.iter().map(|v| c * v).collect();
            let kc = Kernel::from_node_values(g.clone(), scaled).unwrap();
            let w = weak_type_constant(&kc, &g).unwrap();
            assert!(w >= prev - 1e-12, "not nondecreasing in c");
            prev = w;
            if k == 20 {
                last = w;
            }
            if k == 0 {
                first = w;
            }
        }
        assert!(last < 1e-4 * first, "scaling probe: {last} vs {first}");
    }

    #[test]
    fn zoo_parsing() {
        assert!(Kernel::from_zoo("const:2.5", 2).is_ok());
        assert!(Kernel::from_zoo("abscos:0.5", 2).is_ok());
        assert!(Kernel::from_zoo("abscos:0.5", 1).is_err());
        assert!(Kernel::from_zoo("atoms:3,1", 1).is_ok());
        assert!(Kernel::from_zoo("loglog:1.5", 2).is_ok());
        assert!(Kernel::from_zoo("loglog:0.5", 2).is_err());
        assert!(Kernel::from_zoo("lacunary:4", 2).is_ok());
        assert!(Kernel::from_zoo("frobnicate:1", 2).is_err());
    }

    #[test]
    fn homogeneity_by_sampling() {
        let k = Kernel::abs_cos_pow(0.5).unwrap();
        for (x, y) in [(0.3, -1.2), (2.0, 0.1), (-0.7, -0.7)] {
            let v1 = k.eval(&[x, y]).unwrap();
            for t in [0.5, 2.0, 100.0] {
                let v2 = k.eval(&[t * x, t * y]).unwrap();
                assert_relative_eq!(v1, v2, epsilon = 1e-12);
            }
        }
        assert!(k.eval(&[0.0, 0.0]).is_err());
    }
}
