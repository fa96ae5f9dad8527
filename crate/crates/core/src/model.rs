//! Structured Cartesian reservoir models and the test-case builders.
//!
//! Cells are indexed `i + nx * (j + ny * k)` with `k` increasing upwards
//! (gravity points along `-z` in the default models).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::rockfluid::BrooksCoreyParams;
use crate::{Error, Result};

/// One millidarcy in m².
pub const MILLIDARCY: f64 = 9.869233e-16;

/// Standard gravity [m/s²].
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Wetting-phase Darcy flux imposed on the inflow face of the default models [m/s].
pub const DEFAULT_INJECTION_FLUX: f64 = 5e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidProps {
    /// Wetting (injected) phase viscosity [Pa·s].
    pub mu_w: f64,
    /// Non-wetting (displaced) phase viscosity [Pa·s].
    pub mu_nw: f64,
    pub rho_w: f64,
    pub rho_nw: f64,
}

impl FluidProps {
    /// Displaced/injected viscosity ratio 5 and a 300 kg/m³ density contrast.
    pub fn test_case_default() -> Self {
        Self {
            mu_w: 1e-3,
            mu_nw: 5e-3,
            rho_w: 1000.0,
            rho_nw: 1300.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mu_w", self.mu_w),
            ("mu_nw", self.mu_nw),
            ("rho_w", self.rho_w),
            ("rho_nw", self.rho_nw),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Model(format!("{name}={v} must be positive")));
            }
        }
        Ok(())
    }
}

/// A domain face of the bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

impl Side {
    pub fn axis(self) -> usize {
        match self {
            Side::XMin | Side::XMax => 0,
            Side::YMin | Side::YMax => 1,
            Side::ZMin | Side::ZMax => 2,
        }
    }

    pub fn is_min(self) -> bool {
        matches!(self, Side::XMin | Side::YMin | Side::ZMin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    pub inflow: Side,
    /// Wetting-phase Darcy flux through the inflow face [m/s].
    pub injection_flux: f64,
    pub outflow: Side,
    /// Fixed wetting-phase pressure on the outflow face [Pa]. `None` leaves the
    /// pressure system without a Dirichlet condition, which assembly rejects.
    pub outflow_pressure: Option<f64>,
}

impl Default for BoundaryConditions {
    fn default() -> Self {
        Self {
            inflow: Side::XMin,
            injection_flux: DEFAULT_INJECTION_FLUX,
            outflow: Side::XMax,
            outflow_pressure: Some(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl Grid {
    pub fn n_cells(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn counts(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn spacing(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dz]
    }

    /// Domain extents `[Lx, Ly, Lz]`.
    pub fn lengths(&self) -> [f64; 3] {
        [
            self.nx as f64 * self.dx,
            self.ny as f64 * self.dy,
            self.nz as f64 * self.dz,
        ]
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.nx;
        let j = (idx / self.nx) % self.ny;
        let k = idx / (self.nx * self.ny);
        [i, j, k]
    }

    pub fn cell_center(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.ijk(idx);
        [
            (i as f64 + 0.5) * self.dx,
            (j as f64 + 0.5) * self.dy,
            (k as f64 + 0.5) * self.dz,
        ]
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    /// Area of a face whose normal lies along `axis`.
    pub fn face_area(&self, axis: usize) -> f64 {
        match axis {
            0 => self.dy * self.dz,
            1 => self.dx * self.dz,
            _ => self.dx * self.dy,
        }
    }

    /// Cells adjacent to the given domain side, in index order.
    pub fn boundary_cells(&self, side: Side) -> Vec<usize> {
        let axis = side.axis();
        let layer = if side.is_min() {
            0
        } else {
            self.counts()[axis] - 1
        };
        (0..self.n_cells())
            .filter(|&c| self.ijk(c)[axis] == layer)
            .collect()
    }
}

/// Interior connection between two cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    /// Lower-index cell; positive flux runs from `a` to `b`.
    pub a: usize,
    pub b: usize,
    pub axis: usize,
    pub area: f64,
    /// Geometric transmissibility `A · harmonic(k_a, k_b) / d` [m³].
    pub trans: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirModel {
    pub grid: Grid,
    /// Per-cell permeabilities [m²].
    pub kx: Vec<f64>,
    pub ky: Vec<f64>,
    pub kz: Vec<f64>,
    /// Per-cell porosity.
    pub phi: Vec<f64>,
    pub fluid: FluidProps,
    pub rock_fluid: BrooksCoreyParams,
    pub bc: BoundaryConditions,
    /// Gravitational acceleration vector [m/s²].
    pub gravity: [f64; 3],
}

/// Uniform model skeleton: 100 mD, porosity 0.2, test-case fluids and
/// rock-fluid, left-to-right flow and gravity along `-z`.
pub fn build_grid(
    nx: usize,
    ny: usize,
    nz: usize,
    dx: f64,
    dy: f64,
    dz: f64,
) -> Result<ReservoirModel> {
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::Model(format!(
            "cell counts must be positive, got {nx}x{ny}x{nz}"
        )));
    }
    if !(dx > 0.0 && dy > 0.0 && dz > 0.0) {
        return Err(Error::Model(format!(
            "cell sizes must be positive, got {dx}x{dy}x{dz}"
        )));
    }
    let grid = Grid {
        nx,
        ny,
        nz,
        dx,
        dy,
        dz,
    };
    let n = grid.n_cells();
    Ok(ReservoirModel {
        grid,
        kx: vec![100.0 * MILLIDARCY; n],
        ky: vec![100.0 * MILLIDARCY; n],
        kz: vec![100.0 * MILLIDARCY; n],
        phi: vec![0.2; n],
        fluid: FluidProps::test_case_default(),
        rock_fluid: BrooksCoreyParams::cases_1_and_2(),
        bc: BoundaryConditions::default(),
        gravity: [0.0, 0.0, -STANDARD_GRAVITY],
    })
}

/// 2D grid resolution shared by test cases 1 and 2 (x–z cross-section).
pub const CASE_2D_CELLS: (usize, usize) = (50, 20);
/// Physical extent of the 2D cases [m].
pub const CASE_2D_EXTENT: (f64, f64) = (100.0, 40.0);

fn cross_section_2d() -> ReservoirModel {
    let (nx, nz) = CASE_2D_CELLS;
    let (lx, lz) = CASE_2D_EXTENT;
    build_grid(nx, 1, nz, lx / nx as f64, 1.0, lz / nz as f64).expect("static dimensions")
}

/// Two-layer cross-section: upper layer φ = 0.10 / 200 mD, lower layer
/// φ = 0.20 / 100 mD, vertical permeability 10% of horizontal.
pub fn build_test_case_1() -> ReservoirModel {
    build_two_layer(200.0, 100.0, 0.10, 0.20, 0.1)
}

/// Two-layer cross-section with the given horizontal permeabilities [mD],
/// porosities and kz/kx ratio. Test case 1 is one instance.
pub fn build_two_layer(
    kx_upper_md: f64,
    kx_lower_md: f64,
    phi_upper: f64,
    phi_lower: f64,
    kz_ratio: f64,
) -> ReservoirModel {
    let mut m = cross_section_2d();
    let nz = m.grid.nz;
    for c in 0..m.grid.n_cells() {
        let upper = m.grid.ijk(c)[2] >= nz / 2;
        let (k, phi) = if upper {
            (kx_upper_md, phi_upper)
        } else {
            (kx_lower_md, phi_lower)
        };
        m.kx[c] = k * MILLIDARCY;
        m.ky[c] = k * MILLIDARCY;
        m.kz[c] = kz_ratio * k * MILLIDARCY;
        m.phi[c] = phi;
    }
    m
}

/// Four-quadrant cross-section: upper row 200 / 20 mD, lower row 10 / 100 mD
/// (left to right), isotropic, φ = 0.20.
pub fn build_test_case_2() -> ReservoirModel {
    let mut m = cross_section_2d();
    let (nx, nz) = (m.grid.nx, m.grid.nz);
    for c in 0..m.grid.n_cells() {
        let [i, _, k] = m.grid.ijk(c);
        let left = i < nx / 2;
        let upper = k >= nz / 2;
        let md = match (upper, left) {
            (true, true) => 200.0,
            (true, false) => 20.0,
            (false, true) => 10.0,
            (false, false) => 100.0,
        };
        m.kx[c] = md * MILLIDARCY;
        m.ky[c] = md * MILLIDARCY;
        m.kz[c] = md * MILLIDARCY;
        m.phi[c] = 0.20;
    }
    m
}

/// Small 3D stack of alternating mudstone (1 mD, φ = 0.20) and sandstone
/// (1000 mD, φ = 0.10) layers with the high-capillarity rock-fluid set.
pub fn build_layered_3d() -> ReservoirModel {
    let mut m = build_grid(20, 10, 8, 10.0, 10.0, 2.0).expect("static dimensions");
    m.rock_fluid = BrooksCoreyParams::case_4();
    for c in 0..m.grid.n_cells() {
        let mudstone = m.grid.ijk(c)[2].is_multiple_of(2);
        let (md, phi) = if mudstone {
            (1.0, 0.20)
        } else {
            (1000.0, 0.10)
        };
        m.kx[c] = md * MILLIDARCY;
        m.ky[c] = md * MILLIDARCY;
        m.kz[c] = md * MILLIDARCY;
        m.phi[c] = phi;
    }
    m
}

impl ReservoirModel {
    pub fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_cells();
        if self.grid.n_cells() == 0
            || !(self.grid.dx > 0.0 && self.grid.dy > 0.0 && self.grid.dz > 0.0)
        {
            return Err(Error::Model("grid sizes must be positive".into()));
        }
        for (name, field) in [
            ("kx", &self.kx),
            ("ky", &self.ky),
            ("kz", &self.kz),
            ("phi", &self.phi),
        ] {
            if field.len() != n {
                return Err(Error::Model(format!(
                    "{name} has {} entries for {n} cells",
                    field.len()
                )));
            }
        }
        for (c, &k) in self.kx.iter().chain(&self.ky).chain(&self.kz).enumerate() {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::Model(format!(
                    "permeability entry {c} is {k}; must be positive"
                )));
            }
        }
        if let Some(c) = self.phi.iter().position(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::Model(format!(
                "porosity of cell {c} is {}; must lie in (0, 1)",
                self.phi[c]
            )));
        }
        self.fluid.validate()?;
        self.rock_fluid.validate()?;
        if self.bc.inflow == self.bc.outflow {
            return Err(Error::Model(
                "inflow and outflow must be distinct faces".into(),
            ));
        }
        if !(self.bc.injection_flux >= 0.0 && self.bc.injection_flux.is_finite()) {
            return Err(Error::Model(format!(
                "injection flux {} must be non-negative",
                self.bc.injection_flux
            )));
        }
        Ok(())
    }

    pub fn permeability(&self, axis: usize, cell: usize) -> f64 {
        match axis {
            0 => self.kx[cell],
            1 => self.ky[cell],
            _ => self.kz[cell],
        }
    }

    pub fn pore_volume(&self) -> f64 {
        let v = self.grid.cell_volume();
        self.phi.iter().map(|p| p * v).sum()
    }

    pub fn inflow_area(&self) -> f64 {
        let g = &self.grid;
        g.face_area(self.bc.inflow.axis()) * g.boundary_cells(self.bc.inflow).len() as f64
    }

    /// Injected wetting volume rate [m³/s].
    pub fn injection_rate(&self) -> f64 {
        self.bc.injection_flux * self.inflow_area()
    }

    /// Unit vector along gravity, zero when gravity is off.
    pub fn gravity_direction(&self) -> [f64; 3] {
        let g = self.gravity;
        let mag = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        if mag > 0.0 {
            [g[0] / mag, g[1] / mag, g[2] / mag]
        } else {
            [0.0; 3]
        }
    }

    pub fn gravity_magnitude(&self) -> f64 {
        self.gravity.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Transmissibility between two face-adjacent cells.
    pub fn face_transmissibility(&self, a: usize, b: usize) -> Result<f64> {
        let n = self.n_cells();
        if a >= n || b >= n {
            return Err(Error::Model(format!("cell index out of range ({a}, {b})")));
        }
        let (ia, ib) = (self.grid.ijk(a), self.grid.ijk(b));
        let diffs: Vec<usize> = (0..3).filter(|&d| ia[d] != ib[d]).collect();
        match diffs.as_slice() {
            [axis] if ia[*axis].abs_diff(ib[*axis]) == 1 => {
                let axis = *axis;
                let d = self.grid.spacing()[axis];
                let area = self.grid.face_area(axis);
                Ok(
                    area * harmonic_mean(self.permeability(axis, a), self.permeability(axis, b))
                        / d,
                )
            }
            _ => Err(Error::Model(format!("cells {a} and {b} are not adjacent"))),
        }
    }

    /// Half-cell transmissibility from a boundary cell to the given domain side.
    pub fn boundary_transmissibility(&self, cell: usize, side: Side) -> f64 {
        let axis = side.axis();
        let d = 0.5 * self.grid.spacing()[axis];
        self.grid.face_area(axis) * self.permeability(axis, cell) / d
    }

    /// All interior faces ordered by axis, then by lower cell index.
    pub fn interior_faces(&self) -> Vec<Face> {
        let g = &self.grid;
        let mut faces = Vec::new();
        for axis in 0..3 {
            let area = g.face_area(axis);
            for a in 0..g.n_cells() {
                let ijk = g.ijk(a);
                if ijk[axis] + 1 >= g.counts()[axis] {
                    continue;
                }
                let mut nb = ijk;
                nb[axis] += 1;
                let b = g.index(nb[0], nb[1], nb[2]);
                let d = g.spacing()[axis];
                let trans = area
                    * harmonic_mean(self.permeability(axis, a), self.permeability(axis, b))
                    / d;
                faces.push(Face {
                    a,
                    b,
                    axis,
                    area,
                    trans,
                });
            }
        }
        faces
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let model: Self = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        model.validate()?;
        Ok(model)
    }
}

/// `2ab / (a + b)`, zero when either argument is zero.
pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}
