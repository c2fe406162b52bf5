//! Nonnegative functions on uniform grids over boxes in R^n (n = 1, 2),
//! plus the dyadic-cube bookkeeping used by the decomposition code.
//!
//! Values live at cell centers; cells are cubical (equal spacing on every
//! axis). The dyadic origin is the lower corner of the grid box, and dyadic
//! generations are measured in cell units: a generation-s cube spans 2^s
//! cells per axis, so its physical side is `2^s * h`.

use crate::error::{Error, Result};

/// Axis-aligned box; only the first `n` components are meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridBox {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl GridBox {
    pub fn new_1d(lo: f64, hi: f64) -> Self {
        GridBox {
            lo: [lo, 0.0],
            hi: [hi, 0.0],
        }
    }

    pub fn new_2d(lo: [f64; 2], hi: [f64; 2]) -> Self {
        GridBox { lo, hi }
    }

    /// Centered box [-r, r]^n.
    pub fn centered(dim: usize, r: f64) -> Self {
        if dim == 1 {
            GridBox::new_1d(-r, r)
        } else {
            GridBox::new_2d([-r, -r], [r, r])
        }
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn diameter(&self, dim: usize) -> f64 {
        (0..dim).map(|a| self.side(a).powi(2)).sum::<f64>().sqrt()
    }
}

/// A nonnegative function sampled at the cell centers of a uniform grid.
/// Values are stored row-major with the first axis fastest.
#[derive(Debug, Clone)]
pub struct GridFunction {
    dim: usize,
    bbox: GridBox,
    cells: [usize; 2],
    h: f64,
    values: Vec<f64>,
}

impl GridFunction {
    /// Samples `f` at cell centers. Negative samples are clamped to zero.
    pub fn sample(
        dim: usize,
        bbox: GridBox,
        cells: [usize; 2],
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let mut g = GridFunction::zeros(dim, bbox, cells)?;
        let n = g.len();
        for idx in 0..n {
            let c = g.cell_center(idx);
            let v = f(&c[..dim]);
            if !v.is_finite() {
                return Err(Error::Domain(format!("non-finite sample at {c:?}")));
            }
            g.values[idx] = v.max(0.0);
        }
        Ok(g)
    }

    /// Wraps an explicit value vector (row-major, first axis fastest).
    pub fn from_values(
        dim: usize,
        bbox: GridBox,
        cells: [usize; 2],
        values: Vec<f64>,
    ) -> Result<Self> {
        let g = GridFunction::zeros(dim, bbox, cells)?;
        if values.len() != g.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a {}-cell grid",
                values.len(),
                g.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("grid values must be finite and >= 0".into()));
        }
        Ok(GridFunction { values, ..g })
    }

    fn zeros(dim: usize, bbox: GridBox, cells: [usize; 2]) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let mut n_cells = 1usize;
        let mut h = 0.0f64;
        for axis in 0..dim {
            if cells[axis] == 0 {
                return Err(Error::InvalidGrid("zero cells on an axis".into()));
            }
            let side = bbox.side(axis);
            if !(side > 0.0 && side.is_finite()) {
                return Err(Error::InvalidGrid("degenerate box".into()));
            }
            let ha = side / cells[axis] as f64;
            if axis == 0 {
                h = ha;
            } else if ((ha - h) / h).abs() > 1e-9 {
                return Err(Error::InvalidGrid(format!(
                    "non-cubical cells: h0={h}, h{axis}={ha}"
                )));
            }
            n_cells = n_cells
                .checked_mul(cells[axis])
                .ok_or_else(|| Error::InvalidGrid("cell count overflow".into()))?;
        }
        let mut cells = cells;
        if dim == 1 {
            cells[1] = 1;
        }
        Ok(GridFunction {
            dim,
            bbox,
            cells,
            h,
            values: vec![0.0; n_cells],
        })
    }

    /// Builds a zoo function: `indicator_interval:a,b` (n = 1),
    /// `indicator_ball:r` (n = 2), `gauss:s` (truncated at the box),
    /// `table:<path>` (CSV grid dump; box/cells arguments are ignored).
    pub fn from_zoo(id: &str, dim: usize, bbox: GridBox, cells: [usize; 2]) -> Result<Self> {
        let (name, arg) = match id.split_once(':') {
            Some((n, a)) => (n, a),
            None => (id, ""),
        };
        let parse_f64 = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad numeric argument {s:?} in function id {id:?}")))
        };
        match name {
            "indicator_interval" => {
                if dim != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        got: dim,
                    });
                }
                let (a, b) = arg
                    .split_once(',')
                    .ok_or_else(|| Error::Parse(format!("indicator_interval needs a,b in {id:?}")))?;
                let (a, b) = (parse_f64(a)?, parse_f64(b)?);
                GridFunction::sample(dim, bbox, cells, |x| {
                    if x[0] >= a && x[0] <= b {
                        1.0
                    } else {
                        0.0
                    }
                })
            }
            "indicator_ball" => {
                if dim != 2 {
                    return Err(Error::DimensionMismatch {
                        expected: 2,
                        got: dim,
                    });
                }
                let r = parse_f64(arg)?;
                GridFunction::sample(dim, bbox, cells, |x| {
                    if x[0] * x[0] + x[1] * x[1] <= r * r {
                        1.0
                    } else {
                        0.0
                    }
                })
            }
            "gauss" => {
                let s = parse_f64(arg)?;
                if s <= 0.0 {
                    return Err(Error::Domain("gauss width must be positive".into()));
                }
                GridFunction::sample(dim, bbox, cells, |x| {
                    let r2: f64 = x.iter().map(|c| c * c).sum();
                    (-r2 / (2.0 * s * s)).exp()
                })
            }
            "table" => GridFunction::read_csv(arg.trim()),
            _ => Err(Error::Parse(format!("unknown function id {id:?}"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bbox(&self) -> GridBox {
        self.bbox
    }

    pub fn cells(&self) -> [usize; 2] {
        self.cells
    }

    pub fn cell_size(&self) -> f64 {
        self.h
    }

    /// Cell volume h^n.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell_center(&self, idx: usize) -> [f64; 2] {
        let ix = idx % self.cells[0];
        let iy = idx / self.cells[0];
        [
            self.bbox.lo[0] + (ix as f64 + 0.5) * self.h,
            if self.dim == 2 {
                self.bbox.lo[1] + (iy as f64 + 0.5) * self.h
            } else {
                0.0
            },
        ]
    }

    /// Index of the cell containing `x`, or None outside the box.
    pub fn cell_index(&self, x: &[f64]) -> Option<usize> {
        let mut idx = [0usize; 2];
        for axis in 0..self.dim {
            let t = (x[axis] - self.bbox.lo[axis]) / self.h;
            if t < 0.0 || t >= self.cells[axis] as f64 {
                return None;
            }
            idx[axis] = t as usize;
        }
        Some(idx[1] * self.cells[0] + idx[0])
    }

    /// Total mass `sum of values * h^n`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(*v))
    }

    /// Measure of the strict superlevel set: `h^n * #{cells: value > level}`.
    pub fn superlevel_measure(&self, level: f64) -> Result<f64> {
        if !(level > 0.0) {
            return Err(Error::Domain(format!("level {level} must be positive")));
        }
        let count = self.values.iter().filter(|v| **v > level).count();
        Ok(count as f64 * self.cell_volume())
    }

    /// Largest distance from the origin to the center of a nonzero cell
    /// (zero for the zero field).
    pub fn support_radius(&self) -> f64 {
        let mut r2max = 0.0f64;
        for (i, v) in self.values.iter().enumerate() {
            if *v > 0.0 {
                let c = self.cell_center(i);
                let r2 = c[0] * c[0] + c[1] * c[1];
                r2max = r2max.max(r2);
            }
        }
        r2max.sqrt()
    }

    /// (center, mass) of every nonzero cell; the working set for sweeps.
    pub fn support_masses(&self) -> Vec<([f64; 2], f64)> {
        let vol = self.cell_volume();
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .map(|(i, v)| (self.cell_center(i), v * vol))
            .collect()
    }

    /// Cell-wise sum of two fields on the same grid layout.
    pub fn pointwise_sum(a: &GridFunction, b: &GridFunction) -> Result<GridFunction> {
        if a.dim != b.dim || a.cells != b.cells || a.bbox != b.bbox {
            return Err(Error::InvalidGrid("grid layouts differ".into()));
        }
        let values = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x + y)
            .collect();
        Ok(GridFunction {
            values,
            ..a.clone()
        })
    }

    /// Writes the grid dump format: a header row
    /// `n,lo0,hi0[,lo1,hi1],cells0[,cells1]` followed by the values,
    /// one x-row per line, full-precision decimal.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        if self.dim == 1 {
            writeln!(
                w,
                "n,lo0,hi0,cells0\n1,{},{},{}",
                self.bbox.lo[0], self.bbox.hi[0], self.cells[0]
            )?;
        } else {
            writeln!(
                w,
                "n,lo0,hi0,lo1,hi1,cells0,cells1\n2,{},{},{},{},{},{}",
                self.bbox.lo[0],
                self.bbox.hi[0],
                self.bbox.lo[1],
                self.bbox.hi[1],
                self.cells[0],
                self.cells[1]
            )?;
        }
        for row in self.values.chunks(self.cells[0]) {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Reads the grid dump format written by `write_csv`.
    pub fn read_csv(path: &str) -> Result<GridFunction> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let _header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty grid file".into()))?;
        let meta: Vec<f64> = lines
            .next()
            .ok_or_else(|| Error::Parse("missing grid metadata row".into()))?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad metadata field {s:?}")))
            })
            .collect::<Result<_>>()?;
        let dim = meta.first().copied().unwrap_or(0.0) as usize;
        let (bbox, cells) = match dim {
            1 if meta.len() == 4 => (
                GridBox::new_1d(meta[1], meta[2]),
                [meta[3] as usize, 1usize],
            ),
            2 if meta.len() == 7 => (
                GridBox::new_2d([meta[1], meta[3]], [meta[2], meta[4]]),
                [meta[5] as usize, meta[6] as usize],
            ),
            _ => return Err(Error::Parse("malformed grid metadata row".into())),
        };
        let mut values = Vec::new();
        for line in lines {
            for field in line.split(',') {
                values.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad grid value {field:?}")))?,
                );
            }
        }
        GridFunction::from_values(dim, bbox, cells, values)
    }
}

/// A half-open dyadic cube of generation `s`: side 2^s cells, corner at a
/// multiple of 2^s in cell coordinates relative to the dyadic origin (the
/// lower corner of the grid box). Physical side length is `2^s * h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DyadicCube {
    pub generation: u32,
    pub corner: [i64; 2],
}

impl DyadicCube {
    pub fn side_cells(&self) -> i64 {
        1i64 << self.generation
    }

    /// The 2^n children of generation s-1 tiling this cube.
    pub fn children(&self, dim: usize) -> Vec<DyadicCube> {
        assert!(self.generation > 0, "a single cell has no children");
        let half = self.side_cells() / 2;
        let g = self.generation - 1;
        let mut out = Vec::with_capacity(1 << dim);
        let ys: &[i64] = if dim == 2 { &[0, 1] } else { &[0] };
        for &dy in ys {
            for dx in 0..2 {
                out.push(DyadicCube {
                    generation: g,
                    corner: [self.corner[0] + dx * half, self.corner[1] + dy * half],
                });
            }
        }
        out
    }

    /// Whether `other` is contained in this cube (in the first `dim` axes).
    pub fn contains(&self, other: &DyadicCube, dim: usize) -> bool {
        if other.generation > self.generation {
            return false;
        }
        (0..dim).all(|a| {
            other.corner[a] >= self.corner[a]
                && other.corner[a] + other.side_cells() <= self.corner[a] + self.side_cells()
        })
    }

    /// Disjointness at any pair of generations.
    pub fn disjoint(&self, other: &DyadicCube, dim: usize) -> bool {
        (0..dim).any(|a| {
            self.corner[a] + self.side_cells() <= other.corner[a]
                || other.corner[a] + other.side_cells() <= self.corner[a]
        })
    }
}
