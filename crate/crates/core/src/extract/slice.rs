use thiserror::Error;

use crate::boundary::{CellFlags, CellType};
use crate::free_surface::GAS_DENSITY;
use crate::lattice::{Dims, LatticeField, CS2};

/// Published field identifiers; the discriminant is the wire `field id`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u16)]
pub enum FieldId {
    Density = 1,
    Pressure = 2,
    Speed = 3,
    VelocityXY = 4,
    Fill = 5,
    Vorticity = 6,
    Interface = 7,
    Streamlines = 8,
    Flags = 9,
    Isosurface = 10,
}

impl FieldId {
    pub const ALL: [FieldId; 10] = [
        FieldId::Density,
        FieldId::Pressure,
        FieldId::Speed,
        FieldId::VelocityXY,
        FieldId::Fill,
        FieldId::Vorticity,
        FieldId::Interface,
        FieldId::Streamlines,
        FieldId::Flags,
        FieldId::Isosurface,
    ];

    pub fn from_u16(v: u16) -> Option<Self> {
        Self::ALL.into_iter().find(|f| *f as u16 == v)
    }

    pub fn name(self) -> &'static str {
        match self {
            FieldId::Density => "density",
            FieldId::Pressure => "pressure",
            FieldId::Speed => "speed",
            FieldId::VelocityXY => "velocity_xy",
            FieldId::Fill => "fill",
            FieldId::Vorticity => "vorticity",
            FieldId::Interface => "interface",
            FieldId::Streamlines => "streamlines",
            FieldId::Flags => "flags",
            FieldId::Isosurface => "isosurface",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Axis::X),
            1 => Some(Axis::Y),
            2 => Some(Axis::Z),
            _ => None,
        }
    }
}

/// A cutting plane normal to `axis` at cell layer `index`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SliceSpec {
    pub axis: Axis,
    pub index: u32,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ExtractError {
    #[error("slice index {index} out of range for axis {axis:?} (extent {extent})")]
    OutOfBounds { axis: Axis, index: u32, extent: usize },
    #[error("2D simulations only support the z = 0 slice")]
    FlatGrid,
    #[error("field `{0}` is not available as a slice")]
    NotASlice(&'static str),
}

impl SliceSpec {
    pub fn z(index: u32) -> Self {
        SliceSpec {
            axis: Axis::Z,
            index,
        }
    }

    pub fn validate(&self, dims: Dims) -> Result<(), ExtractError> {
        if dims.is_2d() && (self.axis != Axis::Z || self.index != 0) {
            return Err(ExtractError::FlatGrid);
        }
        let extent = dims.as_array()[self.axis as usize];
        if self.index as usize >= extent {
            return Err(ExtractError::OutOfBounds {
                axis: self.axis,
                index: self.index,
                extent,
            });
        }
        Ok(())
    }

    /// In-plane axes `(a, b)`; plane coordinates `(i, j)` run along them.
    pub fn plane_axes(&self) -> (usize, usize) {
        match self.axis {
            Axis::X => (1, 2),
            Axis::Y => (0, 2),
            Axis::Z => (0, 1),
        }
    }

    pub fn plane_dims(&self, dims: Dims) -> (usize, usize) {
        let n = dims.as_array();
        let (a, b) = self.plane_axes();
        (n[a], n[b])
    }

    #[inline]
    pub fn cell(&self, dims: Dims, i: usize, j: usize) -> usize {
        let (a, b) = self.plane_axes();
        let mut p = [0usize; 3];
        p[a] = i;
        p[b] = j;
        p[self.axis as usize] = self.index as usize;
        dims.index(p[0], p[1], p[2])
    }
}

/// A 2D array of `components`-vectors, row-major with `i` fastest. Wall
/// cells hold NaN and are cleared in `valid`. Values are narrowed to `f32`
/// only when framed for the wire.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceData {
    pub width: usize,
    pub height: usize,
    pub components: usize,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl SliceData {
    #[inline]
    pub fn at(&self, i: usize, j: usize, comp: usize) -> f64 {
        self.values[(j * self.width + i) * self.components + comp]
    }

    pub fn new(width: usize, height: usize, components: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height * components);
        SliceData {
            width,
            height,
            components,
            valid: values.chunks(components).map(|v| !v[0].is_nan()).collect(),
            values,
        }
    }

    #[inline]
    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        self.valid[j * self.width + i]
    }
}

/// Samples a scalar or in-plane vector field on a cutting plane. Gas cells
/// report the atmospheric state; their populations are never read.
pub fn extract_slice(
    field: &LatticeField,
    flags: &CellFlags,
    spec: SliceSpec,
    id: FieldId,
) -> Result<SliceData, ExtractError> {
    let dims = field.dims();
    spec.validate(dims)?;
    if id == FieldId::Vorticity {
        let vel = extract_slice(field, flags, spec, FieldId::VelocityXY)?;
        return Ok(super::vorticity(&vel));
    }
    let components = match id {
        FieldId::VelocityXY => 2,
        FieldId::Density | FieldId::Pressure | FieldId::Speed | FieldId::Fill | FieldId::Flags => 1,
        other => return Err(ExtractError::NotASlice(other.name())),
    };
    let (w, h) = spec.plane_dims(dims);
    let (a, b) = spec.plane_axes();
    let mut values = Vec::with_capacity(w * h * components);
    let mut valid = Vec::with_capacity(w * h);
    for j in 0..h {
        for i in 0..w {
            let cell = spec.cell(dims, i, j);
            let kind = flags.kind(cell);
            if id == FieldId::Flags {
                values.push(kind as u8 as f64);
                valid.push(true);
                continue;
            }
            if kind == CellType::Wall {
                values.extend(std::iter::repeat(f64::NAN).take(components));
                valid.push(false);
                continue;
            }
            valid.push(true);
            let (rho, u) = if kind == CellType::Gas {
                (GAS_DENSITY, [0.0; 3])
            } else {
                (field.rho(cell), field.velocity(cell))
            };
            match id {
                FieldId::Density => values.push(rho),
                FieldId::Pressure => values.push(CS2 * (rho - 1.0)),
                FieldId::Speed => {
                    values.push((u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt())
                }
                FieldId::VelocityXY => {
                    values.push(u[a]);
                    values.push(u[b]);
                }
                FieldId::Fill => values.push(flags.fill(cell)),
                _ => unreachable!(),
            }
        }
    }
    Ok(SliceData {
        width: w,
        height: h,
        components,
        values,
        valid,
    })
}
