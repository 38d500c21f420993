//! Domains, discrete scalar fields, finite-difference calculus, and the
//! discrete L^p/H1/H2 norms used by every other module.
//!
//! Two domain families are supported: tensor-product boxes in 1..=3
//! dimensions, and balls solved through their radially symmetric 1D
//! reduction. Homogeneous Dirichlet values on the boundary are implicit:
//! boundary nodes are never stored and contribute 0 to every stencil.

use std::fmt::Write as _;
use std::sync::OnceLock;

use thiserror::Error;

/// Errors from grid construction, field validation, and the dump format.
#[derive(Debug, Error)]
pub enum GridError {
    #[error("dimension must be 1, 2, or 3, got {0}")]
    InvalidDimension(usize),
    #[error("domain extent must be positive and finite, got {0}")]
    InvalidExtent(f64),
    #[error("resolution must be at least 3 interior nodes, got {0}")]
    InvalidResolution(usize),
    #[error("field has {got} values but the grid holds {want} interior nodes")]
    LengthMismatch { got: usize, want: usize },
    #[error("non-finite value at node {index}: {value}")]
    NonFinite { index: usize, value: f64 },
    #[error("L^p order must satisfy p >= 1 (or be infinite), got {0}")]
    InvalidOrder(f64),
    #[error("malformed field dump: {0}")]
    Parse(String),
}

/// Geometry family of a [`DomainSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Box,
    Ball,
}

impl DomainKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainKind::Box => "box",
            DomainKind::Ball => "ball",
        }
    }
}

/// A bounded domain: either a box of side `extent` or a ball of radius
/// `extent`, in dimension 1..=3. Ball domains are handled through the
/// radially symmetric reduction, so `center` only matters to consumers
/// that embed the ball in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    kind: DomainKind,
    dim: usize,
    extent: f64,
    center: [f64; 3],
}

impl DomainSpec {
    pub fn box_domain(dim: usize, side: f64) -> Result<Self, GridError> {
        Self::new(DomainKind::Box, dim, side, [0.0; 3])
    }

    pub fn unit_box(dim: usize) -> Result<Self, GridError> {
        Self::box_domain(dim, 1.0)
    }

    pub fn ball(dim: usize, radius: f64) -> Result<Self, GridError> {
        Self::new(DomainKind::Ball, dim, radius, [0.0; 3])
    }

    pub fn ball_at(dim: usize, radius: f64, center: [f64; 3]) -> Result<Self, GridError> {
        Self::new(DomainKind::Ball, dim, radius, center)
    }

    fn new(kind: DomainKind, dim: usize, extent: f64, center: [f64; 3]) -> Result<Self, GridError> {
        if !(1..=3).contains(&dim) {
            return Err(GridError::InvalidDimension(dim));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(GridError::InvalidExtent(extent));
        }
        Ok(Self {
            kind,
            dim,
            extent,
            center,
        })
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Box side length or ball radius.
    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn center(&self) -> [f64; 3] {
        self.center
    }
}

/// Surface area of the unit sphere S^{n-1}, the angular factor of the
/// radial measure omega_{n-1} r^{n-1} dr.
pub fn unit_sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Uniform interior grid over a [`DomainSpec`] with `res` interior nodes
/// per axis and spacing `h = extent / (res + 1)`.
///
/// Box grids store `res^n` nodes in row-major order (axis 0 slowest) at
/// coordinates `(i_k + 1) h`. Ball grids store `res` radial nodes at
/// `r_i = (i + 1) h`; the center `r = 0` is not a stored node and is
/// handled by the even-symmetry limit inside the stencils.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: DomainSpec,
    res: usize,
    h: f64,
}

impl Grid {
    pub fn new(domain: DomainSpec, res: usize) -> Result<Self, GridError> {
        if res < 3 {
            return Err(GridError::InvalidResolution(res));
        }
        let h = domain.extent / (res + 1) as f64;
        Ok(Self { domain, res, h })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn res(&self) -> usize {
        self.res
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of stored interior nodes.
    pub fn node_count(&self) -> usize {
        match self.domain.kind {
            DomainKind::Box => self.res.pow(self.domain.dim as u32),
            DomainKind::Ball => self.res,
        }
    }

    /// Coordinates of a node: `dim` box coordinates, or the single radius
    /// for a ball grid.
    pub fn node_coords(&self, idx: usize) -> Vec<f64> {
        match self.domain.kind {
            DomainKind::Box => {
                let dim = self.domain.dim;
                let mut coords = vec![0.0; dim];
                let mut rem = idx;
                for k in (0..dim).rev() {
                    coords[k] = ((rem % self.res) + 1) as f64 * self.h;
                    rem /= self.res;
                }
                coords
            }
            DomainKind::Ball => vec![(idx + 1) as f64 * self.h],
        }
    }

    /// Quadrature weight of a node in the discrete L^2 measure.
    pub fn node_weight(&self, idx: usize) -> f64 {
        match self.domain.kind {
            DomainKind::Box => self.h.powi(self.domain.dim as i32),
            DomainKind::Ball => {
                let r = (idx + 1) as f64 * self.h;
                unit_sphere_area(self.domain.dim) * r.powi(self.domain.dim as i32 - 1) * self.h
            }
        }
    }

    fn strides(&self) -> [usize; 3] {
        let dim = self.domain.dim;
        let mut s = [0usize; 3];
        for k in 0..dim {
            s[k] = self.res.pow((dim - 1 - k) as u32);
        }
        s
    }
}

/// Real scalar values on the interior nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    /// Wraps a value vector, checking length and finiteness.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        let want = grid.node_count();
        if values.len() != want {
            return Err(GridError::LengthMismatch {
                got: values.len(),
                want,
            });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(GridError::NonFinite { index, value });
            }
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            values: vec![0.0; grid.node_count()],
            grid: grid.clone(),
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self {
            values: vec![c; grid.node_count()],
            grid: grid.clone(),
        }
    }

    /// Samples a function of the node coordinates (box) or radius (ball).
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|i| f(&grid.node_coords(i)))
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
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

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise sum. Panics if the grids differ (caller contract).
    pub fn add(&self, other: &Field) -> Field {
        self.zip(other, |a, b| a + b)
    }

    /// Pointwise difference. Panics if the grids differ.
    pub fn sub(&self, other: &Field) -> Field {
        self.zip(other, |a, b| a - b)
    }

    /// Pointwise product. Panics if the grids differ.
    pub fn mul(&self, other: &Field) -> Field {
        self.zip(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    fn zip(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Serializes to the text dump format: one header line
    /// `n res h domain-kind`, then one node value per line in row-major
    /// order, all with 18 significant digits.
    pub fn dump(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 26 + 64);
        let d = &self.grid.domain;
        let _ = writeln!(
            out,
            "{} {} {:.17e} {}",
            d.dim,
            self.grid.res,
            self.grid.h,
            d.kind.as_str()
        );
        for v in &self.values {
            let _ = writeln!(out, "{v:.17e}");
        }
        out
    }

    /// Parses the dump format produced by [`Field::dump`].
    pub fn parse(text: &str) -> Result<Field, GridError> {
        let mut tokens = text.split_whitespace();
        let mut next = |name: &str| {
            tokens
                .next()
                .ok_or_else(|| GridError::Parse(format!("missing {name}")))
        };
        let dim: usize = next("dimension")?
            .parse()
            .map_err(|e| GridError::Parse(format!("bad dimension: {e}")))?;
        let res: usize = next("resolution")?
            .parse()
            .map_err(|e| GridError::Parse(format!("bad resolution: {e}")))?;
        let h: f64 = next("spacing")?
            .parse()
            .map_err(|e| GridError::Parse(format!("bad spacing: {e}")))?;
        let kind = match next("domain kind")? {
            "box" => DomainKind::Box,
            "ball" => DomainKind::Ball,
            other => return Err(GridError::Parse(format!("unknown domain kind {other:?}"))),
        };
        let extent = h * (res + 1) as f64;
        let domain = match kind {
            DomainKind::Box => DomainSpec::box_domain(dim, extent)?,
            DomainKind::Ball => DomainSpec::ball(dim, extent)?,
        };
        let grid = Grid::new(domain, res)?;
        let values: Vec<f64> = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| GridError::Parse(format!("bad value {t:?}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        Field::new(grid, values)
    }
}

/// Worker threads for pointwise stencil application, from the
/// `NEWTON_IMBED_THREADS` environment variable (default 1, the
/// verification mode). Only output-partitioned maps are parallelized,
/// so results are bitwise identical for every thread count.
pub fn configured_threads() -> usize {
    static THREADS: OnceLock<usize> = OnceLock::new();
    *THREADS.get_or_init(|| {
        std::env::var("NEWTON_IMBED_THREADS")
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .filter(|&t| t >= 1)
            .unwrap_or(1)
    })
}

fn build_values<F>(len: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync,
{
    let threads = configured_threads();
    if threads <= 1 || len < 4096 {
        return (0..len).map(f).collect();
    }
    let mut out = vec![0.0; len];
    let chunk = len.div_ceil(threads);
    std::thread::scope(|scope| {
        for (ci, slab) in out.chunks_mut(chunk).enumerate() {
            let f = &f;
            let start = ci * chunk;
            scope.spawn(move || {
                for (k, v) in slab.iter_mut().enumerate() {
                    *v = f(start + k);
                }
            });
        }
    });
    out
}

/// Discrete Laplacian with the implicit zero boundary.
///
/// Box grids use the second-order centered stencil per axis. Ball grids
/// use u'' + (n-1) u' / r on the radial line; the phantom center value is
/// eliminated by the even-symmetry quadratic extrapolation
/// `u(0) = (4 u(h) - u(2h)) / 3`, which realizes the symmetric limit
/// `n u''(0)` and keeps the stencil exact on radial quadratics.
pub fn laplacian(u: &Field) -> Field {
    let grid = &u.grid;
    let h2 = grid.h * grid.h;
    let v = &u.values;
    match grid.domain.kind {
        DomainKind::Box => {
            let dim = grid.domain.dim;
            let res = grid.res;
            let strides = grid.strides();
            let values = build_values(v.len(), |idx| {
                let mut acc = 0.0;
                for k in 0..dim {
                    let stride = strides[k];
                    let pos = (idx / stride) % res;
                    let up = if pos + 1 < res { v[idx + stride] } else { 0.0 };
                    let dn = if pos > 0 { v[idx - stride] } else { 0.0 };
                    acc += up + dn - 2.0 * v[idx];
                }
                acc / h2
            });
            Field {
                grid: grid.clone(),
                values,
            }
        }
        DomainKind::Ball => {
            let n = grid.domain.dim as f64;
            let res = grid.res;
            let h = grid.h;
            let mut values = vec![0.0; res];
            values[0] = (2.0 * n / 3.0) * (v[1] - v[0]) / h2;
            for i in 1..res {
                let up = if i + 1 < res { v[i + 1] } else { 0.0 };
                let r = (i + 1) as f64 * h;
                values[i] =
                    (up - 2.0 * v[i] + v[i - 1]) / h2 + (n - 1.0) / r * (up - v[i - 1]) / (2.0 * h);
            }
            Field {
                grid: grid.clone(),
                values,
            }
        }
    }
}

/// Discrete L^2 inner product (rectangle rule in the domain measure).
/// Panics if the grids differ.
pub fn inner(u: &Field, v: &Field) -> f64 {
    assert_eq!(u.grid, v.grid, "fields live on different grids");
    match u.grid.domain.kind {
        DomainKind::Box => {
            let w = u.grid.h.powi(u.grid.domain.dim as i32);
            let mut acc = 0.0;
            for i in 0..u.values.len() {
                acc += u.values[i] * v.values[i];
            }
            acc * w
        }
        DomainKind::Ball => {
            let omega = unit_sphere_area(u.grid.domain.dim);
            let h = u.grid.h;
            let p = u.grid.domain.dim as i32 - 1;
            let mut acc = 0.0;
            for i in 0..u.values.len() {
                let r = (i + 1) as f64 * h;
                acc += u.values[i] * v.values[i] * r.powi(p);
            }
            acc * omega * h
        }
    }
}

/// Discrete L^p norm, `p = f64::INFINITY` for the max norm.
pub fn norm_lp(u: &Field, p: f64) -> Result<f64, GridError> {
    if p.is_infinite() && p > 0.0 {
        return Ok(u.max_abs());
    }
    if !(p.is_finite() && p >= 1.0) {
        return Err(GridError::InvalidOrder(p));
    }
    let mut acc = 0.0;
    for i in 0..u.values.len() {
        let a = u.values[i].abs();
        let t = if p == 2.0 {
            a * a
        } else if p == 1.0 {
            a
        } else {
            a.powf(p)
        };
        acc += t * u.grid.node_weight(i);
    }
    Ok(acc.powf(1.0 / p))
}

fn norm_l2_sq(u: &Field) -> f64 {
    inner(u, u)
}

/// Squared H1_0 gradient seminorm: forward face differences with the
/// implicit zero boundary. On ball grids the faces sit between radial
/// nodes (plus the outer boundary face) with face-centered weights; the
/// symmetric center region [0, h] carries no face.
fn grad_sq(u: &Field) -> f64 {
    let grid = &u.grid;
    let h = grid.h;
    let v = &u.values;
    match grid.domain.kind {
        DomainKind::Box => {
            let dim = grid.domain.dim;
            let res = grid.res;
            let strides = grid.strides();
            let w = h.powi(dim as i32);
            let mut acc = 0.0;
            for k in 0..dim {
                let stride = strides[k];
                for idx in 0..v.len() {
                    let pos = (idx / stride) % res;
                    let left = if pos > 0 { v[idx - stride] } else { 0.0 };
                    let d = (v[idx] - left) / h;
                    acc += d * d;
                    if pos + 1 == res {
                        let d = v[idx] / h;
                        acc += d * d;
                    }
                }
            }
            acc * w
        }
        DomainKind::Ball => {
            let omega = unit_sphere_area(grid.domain.dim);
            let p = grid.domain.dim as i32 - 1;
            let res = grid.res;
            let mut acc = 0.0;
            for i in 0..res {
                let up = if i + 1 < res { v[i + 1] } else { 0.0 };
                let d = (up - v[i]) / h;
                let r_face = (i as f64 + 1.5) * h;
                acc += d * d * r_face.powi(p);
            }
            acc * omega * h
        }
    }
}

/// Squared sum of all second differences (the discrete Hessian gauge).
/// Box grids take every D_ii plus both orders of each mixed D_ij; ball
/// grids take D_rr plus the (n-1)-fold tangential term (D_r / r)^2.
fn hess_sq(u: &Field) -> f64 {
    let grid = &u.grid;
    let h = grid.h;
    let h2 = h * h;
    let v = &u.values;
    match grid.domain.kind {
        DomainKind::Box => {
            let dim = grid.domain.dim;
            let res = grid.res;
            let strides = grid.strides();
            let w = h.powi(dim as i32);
            let at = |idx: usize, k: usize, shift: isize| -> f64 {
                let stride = strides[k];
                let pos = (idx / stride) % res;
                let target = pos as isize + shift;
                if target < 0 || target >= res as isize {
                    0.0
                } else {
                    v[(idx as isize + shift * stride as isize) as usize]
                }
            };
            let mut acc = 0.0;
            for k in 0..dim {
                for idx in 0..v.len() {
                    let d = (at(idx, k, 1) - 2.0 * v[idx] + at(idx, k, -1)) / h2;
                    acc += d * d;
                }
            }
            for k1 in 0..dim {
                for k2 in (k1 + 1)..dim {
                    let s1 = strides[k1] as isize;
                    let s2 = strides[k2] as isize;
                    for idx in 0..v.len() {
                        let p1 = (idx / strides[k1]) % res;
                        let p2 = (idx / strides[k2]) % res;
                        let pick = |d1: isize, d2: isize| -> f64 {
                            let t1 = p1 as isize + d1;
                            let t2 = p2 as isize + d2;
                            if t1 < 0 || t1 >= res as isize || t2 < 0 || t2 >= res as isize {
                                0.0
                            } else {
                                v[(idx as isize + d1 * s1 + d2 * s2) as usize]
                            }
                        };
                        let d =
                            (pick(1, 1) - pick(1, -1) - pick(-1, 1) + pick(-1, -1)) / (4.0 * h2);
                        acc += 2.0 * d * d;
                    }
                }
            }
            acc * w
        }
        DomainKind::Ball => {
            let n = grid.domain.dim as f64;
            let res = grid.res;
            let mut acc = 0.0;
            for i in 0..res {
                let up = if i + 1 < res { v[i + 1] } else { 0.0 };
                let dn = if i > 0 {
                    v[i - 1]
                } else {
                    (4.0 * v[0] - v[1]) / 3.0
                };
                let r = (i + 1) as f64 * h;
                let d2 = (up - 2.0 * v[i] + dn) / h2;
                let d1 = (up - dn) / (2.0 * h);
                acc += (d2 * d2 + (n - 1.0) * (d1 / r) * (d1 / r)) * grid.node_weight(i);
            }
            acc
        }
    }
}

/// Discrete H1 norm: sqrt(||u||_{L2}^2 + ||Du||_{L2}^2).
pub fn norm_h1(u: &Field) -> f64 {
    (norm_l2_sq(u) + grad_sq(u)).sqrt()
}

/// Discrete H2 norm: H1 plus all second differences.
pub fn norm_h2(u: &Field) -> f64 {
    (norm_l2_sq(u) + grad_sq(u) + hess_sq(u)).sqrt()
}
