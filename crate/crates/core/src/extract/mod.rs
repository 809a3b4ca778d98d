//! Visualization products computed from a simulation snapshot: slices,
//! interface contours and isosurfaces, streamlines and vorticity.

mod contour;
mod slice;
mod streamline;
mod vorticity;

pub use contour::{extract_interface, extract_isosurface, InterfaceMesh, ScalarGrid};
pub use slice::{extract_slice, Axis, ExtractError, FieldId, SliceData, SliceSpec};
pub use streamline::{sample_velocity, seed_grid, trace_streamlines, STAGNATION_SPEED};
pub use vorticity::vorticity;

use crate::boundary::CellFlags;
use crate::lattice::LatticeField;

/// Contour level of the fill fraction.
pub const INTERFACE_LEVEL: f64 = 0.5;

/// Streamline step used for published frames, in cells.
pub const FRAME_STREAMLINE_STEP: f64 = 0.5;

/// A field product flattened for transport: `width * height` records of
/// `components` floats each.
#[derive(Clone, Debug, PartialEq)]
pub struct Rendered {
    pub width: u32,
    pub height: u32,
    pub components: u32,
    pub data: Vec<f32>,
}

impl Rendered {
    fn records(components: u32, data: Vec<f32>) -> Self {
        let width = (data.len() / components as usize) as u32;
        Rendered {
            width,
            height: 1,
            components,
            data,
        }
    }
}

/// Renders one subscribed field. Slices keep their 2D shape; interface
/// segments, triangles and streamline points are emitted as flat records.
pub fn render(
    field: &LatticeField,
    flags: &CellFlags,
    id: FieldId,
    spec: SliceSpec,
) -> Result<Rendered, ExtractError> {
    let dims = field.dims();
    match id {
        FieldId::Isosurface => {
            if dims.is_2d() {
                return Err(ExtractError::NotASlice("isosurface of a 2D lattice"));
            }
            let mesh = extract_isosurface(&ScalarGrid::fill_volume(flags), INTERFACE_LEVEL);
            let mut data = Vec::with_capacity(mesh.triangles.len() * 9);
            for tri in &mesh.triangles {
                for &v in tri {
                    data.extend(mesh.vertices[v as usize].iter().map(|&c| c as f32));
                }
            }
            Ok(Rendered::records(9, data))
        }
        FieldId::Interface => {
            spec.validate(dims)?;
            let mesh = extract_interface(&ScalarGrid::fill_slice(flags, spec), INTERFACE_LEVEL);
            let mut data = Vec::with_capacity(mesh.segments.len() * 4);
            for seg in &mesh.segments {
                for &v in seg {
                    let p = mesh.vertices[v as usize];
                    data.extend([p[0] as f32, p[1] as f32]);
                }
            }
            Ok(Rendered::records(4, data))
        }
        FieldId::Streamlines => {
            let vel = extract_slice(field, flags, spec, FieldId::VelocityXY)?;
            let spacing = (vel.width.max(vel.height) / 24).max(4);
            let seeds = seed_grid(&vel, spacing);
            let max_steps = 2 * (vel.width + vel.height);
            let lines = trace_streamlines(&vel, &seeds, FRAME_STREAMLINE_STEP, max_steps);
            let mut data = Vec::new();
            for (id, line) in lines.iter().enumerate() {
                for p in line {
                    data.extend([p[0] as f32, p[1] as f32, id as f32]);
                }
            }
            Ok(Rendered::records(3, data))
        }
        _ => {
            let s = extract_slice(field, flags, spec, id)?;
            Ok(Rendered {
                width: s.width as u32,
                height: s.height as u32,
                components: s.components as u32,
                data: s.values.iter().map(|&v| v as f32).collect(),
            })
        }
    }
}
