//! Problem gallery: the soft-magnetic-composite eddy-current benchmark, a
//! smooth manufactured solution, and square domains with holes.

use std::f64::consts::PI;

use crate::assembly::{self, AssembledSystem, BoundaryData, CoefficientField, LoadVector, Source};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Rect};
use crate::registry::{Named, Registry};

pub type FieldFn = fn(f64, f64) -> [f64; 2];
pub type CurlFn = fn(f64, f64) -> f64;

#[derive(Debug, Clone, Copy)]
pub enum SourceSpec {
    Zero,
    Constant([f64; 2]),
    Field(FieldFn),
}

#[derive(Debug, Clone, Copy)]
pub enum BoundarySpec {
    Homogeneous,
    Tangential(f64),
    Field(FieldFn),
}

#[derive(Debug, Clone, Copy)]
pub struct ExactSolution {
    pub u: FieldFn,
    pub curl: CurlFn,
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: &'static str,
    pub mesh: Mesh,
    pub coeff: CoefficientField,
    pub source: SourceSpec,
    pub boundary: BoundarySpec,
    pub exact: Option<ExactSolution>,
    /// Parameter summary recorded in experiment outputs.
    pub description: String,
}

impl ProblemSpec {
    pub fn assemble(&self) -> Result<AssembledSystem> {
        assembly::assemble(&self.mesh, &self.coeff)
    }

    pub fn load(&self, system: &AssembledSystem) -> Result<LoadVector> {
        let source = match self.source {
            SourceSpec::Zero => Source::Zero,
            SourceSpec::Constant(f) => Source::Constant(f),
            SourceSpec::Field(ref f) => Source::Field(f),
        };
        let boundary = match self.boundary {
            BoundarySpec::Homogeneous => BoundaryData::Homogeneous,
            BoundarySpec::Tangential(v) => BoundaryData::Tangential(v),
            BoundarySpec::Field(ref f) => BoundaryData::Field(f),
        };
        assembly::assemble_load(&self.mesh, system, &source, &boundary)
    }
}

/// Knobs shared by the problem builders; each builder reads the ones it
/// needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemParams {
    /// SMC unit cells per side of `[0, 1]^2`.
    pub cells: usize,
    /// Conductor side as a fraction of the unit-cell side.
    pub fill: f64,
    pub sigma_air: f64,
    /// Mesh cells per unit length.
    pub h_inv: usize,
    /// Cells per side for the manufactured and holed problems.
    pub mesh_n: usize,
    pub n_holes: usize,
    /// Hole side in mesh cells.
    pub hole_cells: usize,
    /// Mesh cells between neighbouring holes.
    pub hole_gap: usize,
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self {
            cells: 6,
            fill: 0.8125,
            sigma_air: 0.01,
            h_inv: 192,
            mesh_n: 36,
            n_holes: 1,
            hole_cells: 2,
            hole_gap: 3,
        }
    }
}

pub const REGION_AIR: u32 = 0;
pub const REGION_SMC: u32 = 1;

/// Eddy-current benchmark on `[-0.25, 1.25]^2`: `cells x cells` unit cells
/// inside `[0, 1]^2`, each with a centred square conductor of side
/// `fill / cells`. `mu = 50, sigma = 100` in the conductors, `mu = 1,
/// sigma = sigma_air` elsewhere, `n x u = 1` on the boundary and no source.
pub fn smc_problem(cells: usize, fill: f64, sigma_air: f64, h_inv: usize) -> Result<ProblemSpec> {
    if cells == 0 || h_inv == 0 {
        return Err(Error::Problem("cell count and mesh resolution must be positive".into()));
    }
    if !(fill > 0.0 && fill <= 1.0) {
        return Err(Error::Problem(format!("fill {fill} outside (0, 1]")));
    }
    if !(sigma_air > 0.0 && sigma_air.is_finite()) {
        return Err(Error::Problem(format!("sigma_air {sigma_air} must be positive")));
    }
    if !h_inv.is_multiple_of(cells) || !h_inv.is_multiple_of(4) {
        return Err(Error::Problem(format!(
            "h_inv = {h_inv} must be a multiple of 4 and of the cell count {cells}"
        )));
    }
    let per_cell = h_inv / cells;
    let conductor = fill * per_cell as f64;
    let c = conductor.round() as usize;
    if (conductor - c as f64).abs() > 1e-9 || c == 0 || !(per_cell - c).is_multiple_of(2) {
        return Err(Error::Problem(format!(
            "fill {fill} gives a conductor of {conductor} mesh cells in a {per_cell}-cell unit cell; \
             it must be a whole number with an even remainder so it can be centred"
        )));
    }
    let gap = (per_cell - c) / 2;
    let n = h_inv * 3 / 2;
    let offset = h_inv / 4;
    let inside = move |i: usize| -> bool {
        if i < offset || i >= offset + h_inv {
            return false;
        }
        let p = (i - offset) % per_cell;
        p >= gap && p < gap + c
    };
    let mesh = Mesh::structured(n, n, Rect::new(-0.25, -0.25, 1.25, 1.25), &[])?
        .with_regions(move |i, j| if inside(i) && inside(j) { REGION_SMC } else { REGION_AIR });
    let coeff = CoefficientField::from_regions(&mesh, |r| {
        if r == REGION_SMC {
            (1.0 / 50.0, 100.0)
        } else {
            (1.0, sigma_air)
        }
    })?;
    Ok(ProblemSpec {
        name: "smc",
        mesh,
        coeff,
        source: SourceSpec::Zero,
        boundary: BoundarySpec::Tangential(1.0),
        exact: None,
        description: format!("smc cells={cells} fill={fill} sigma_air={sigma_air} h=1/{h_inv}"),
    })
}

fn manufactured_u(x: f64, y: f64) -> [f64; 2] {
    [(PI * y).sin(), (PI * x).sin()]
}

fn manufactured_curl(x: f64, y: f64) -> f64 {
    PI * (PI * x).cos() - PI * (PI * y).cos()
}

fn manufactured_f(x: f64, y: f64) -> [f64; 2] {
    let k = PI * PI + 1.0;
    [k * (PI * y).sin(), k * (PI * x).sin()]
}

/// `u = (sin(pi y), sin(pi x))` on the unit square with `nu = kappa = 1`.
pub fn manufactured_problem(n: usize) -> Result<ProblemSpec> {
    let mesh = Mesh::structured(n, n, Rect::unit(), &[])?;
    let coeff = CoefficientField::uniform(&mesh, 1.0, 1.0)?;
    Ok(ProblemSpec {
        name: "manufactured",
        mesh,
        coeff,
        source: SourceSpec::Field(manufactured_f),
        boundary: BoundarySpec::Field(manufactured_u),
        exact: Some(ExactSolution {
            u: manufactured_u,
            curl: manufactured_curl,
        }),
        description: format!("manufactured n={n}"),
    })
}

/// Hole rectangles of side `size` cells in a row through the centre of an
/// `n x n` grid on the unit square, `gap` cells apart.
pub fn centred_holes(n: usize, n_holes: usize, size: usize, gap: usize) -> Result<Vec<Rect>> {
    if n_holes == 0 {
        return Ok(Vec::new());
    }
    if size == 0 {
        return Err(Error::Problem("hole size must be at least one cell".into()));
    }
    let width = n_holes * size + (n_holes - 1) * gap;
    if width + 2 > n || size + 2 > n || !(n - width).is_multiple_of(2) || !(n - size).is_multiple_of(2) {
        return Err(Error::Problem(format!(
            "{n_holes} holes of {size} cells with gap {gap} cannot be centred in a {n}-cell grid"
        )));
    }
    let h = 1.0 / n as f64;
    let x0 = (n - width) / 2;
    let y0 = (n - size) / 2;
    Ok((0..n_holes)
        .map(|k| {
            let i = x0 + k * (size + gap);
            Rect::new(i as f64 * h, y0 as f64 * h, (i + size) as f64 * h, (y0 + size) as f64 * h)
        })
        .collect())
}

/// Unit square with `n_holes` square holes, `nu = kappa = 1`, `f = (1, 1)`
/// and homogeneous boundary data on the outer boundary and the holes.
pub fn holed_domain(n: usize, n_holes: usize, size: usize, gap: usize) -> Result<ProblemSpec> {
    let holes = centred_holes(n, n_holes, size, gap)?;
    let mesh = Mesh::structured(n, n, Rect::unit(), &holes)?;
    let coeff = CoefficientField::uniform(&mesh, 1.0, 1.0)?;
    Ok(ProblemSpec {
        name: "holed",
        mesh,
        coeff,
        source: SourceSpec::Constant([1.0, 1.0]),
        boundary: BoundarySpec::Homogeneous,
        exact: None,
        description: format!("holed n={n} holes={n_holes} size={size} gap={gap}"),
    })
}

pub trait ProblemBuilder: Named + Send + Sync {
    fn build(&self, p: &ProblemParams) -> Result<ProblemSpec>;
}

pub struct Smc;
pub struct Manufactured;
pub struct Holed;

impl Named for Smc {
    fn name(&self) -> &'static str {
        "smc"
    }
}

impl ProblemBuilder for Smc {
    fn build(&self, p: &ProblemParams) -> Result<ProblemSpec> {
        smc_problem(p.cells, p.fill, p.sigma_air, p.h_inv)
    }
}

impl Named for Manufactured {
    fn name(&self) -> &'static str {
        "manufactured"
    }
}

impl ProblemBuilder for Manufactured {
    fn build(&self, p: &ProblemParams) -> Result<ProblemSpec> {
        manufactured_problem(p.mesh_n)
    }
}

impl Named for Holed {
    fn name(&self) -> &'static str {
        "holed"
    }
}

impl ProblemBuilder for Holed {
    fn build(&self, p: &ProblemParams) -> Result<ProblemSpec> {
        holed_domain(p.mesh_n, p.n_holes, p.hole_cells, p.hole_gap)
    }
}

pub fn default_registry() -> Registry<dyn ProblemBuilder> {
    let mut r: Registry<dyn ProblemBuilder> = Registry::new("problem");
    r.register(Box::new(Smc));
    r.register(Box::new(Manufactured));
    r.register(Box::new(Holed));
    r
}
