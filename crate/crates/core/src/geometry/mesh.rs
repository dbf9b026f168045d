use std::fmt;
use std::io::Cursor;
use std::path::Path;

use super::{GeometryError, Point, TriangleMesh};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Stl,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<MeshFormat> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "obj" => Some(MeshFormat::Obj),
            "stl" => Some(MeshFormat::Stl),
            _ => None,
        }
    }
}

impl fmt::Display for MeshFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeshFormat::Obj => "OBJ",
            MeshFormat::Stl => "STL",
        })
    }
}

#[derive(Clone, Debug)]
pub struct LoadedMesh {
    pub mesh: TriangleMesh,
    /// Degenerate triangles removed while loading.
    pub dropped_triangles: usize,
}

/// Parse an OBJ or STL (ASCII or binary) mesh. Degenerate triangles are dropped and
/// reported through `dropped_triangles` and a log warning.
pub fn load_mesh(bytes: &[u8], format: MeshFormat) -> Result<LoadedMesh, GeometryError> {
    let (vertices, triangles) = match format {
        MeshFormat::Obj => parse_obj(bytes)?,
        MeshFormat::Stl => parse_stl(bytes)?,
    };
    let (mesh, dropped_triangles) = TriangleMesh::new(vertices, triangles)?;
    if dropped_triangles > 0 {
        log::warn!("dropped {dropped_triangles} degenerate triangle(s) from {format} mesh");
    }
    Ok(LoadedMesh {
        mesh,
        dropped_triangles,
    })
}

type RawMesh = (Vec<Point>, Vec<[usize; 3]>);

fn parse_obj(bytes: &[u8]) -> Result<RawMesh, GeometryError> {
    let options = tobj::LoadOptions {
        triangulate: true,
        ..Default::default()
    };
    let (models, _) = tobj::load_obj_buf(&mut Cursor::new(bytes), &options, |_| {
        Ok(Default::default())
    })
    .map_err(|e| GeometryError::Parse {
        format: MeshFormat::Obj,
        message: e.to_string(),
    })?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for model in models {
        let offset = vertices.len();
        vertices.extend(
            model
                .mesh
                .positions
                .chunks_exact(3)
                .map(|p| Point::new(p[0] as f64, p[1] as f64, p[2] as f64)),
        );
        triangles.extend(
            model
                .mesh
                .indices
                .chunks_exact(3)
                .map(|t| [0, 1, 2].map(|k| offset + t[k] as usize)),
        );
    }
    Ok((vertices, triangles))
}

fn parse_stl(bytes: &[u8]) -> Result<RawMesh, GeometryError> {
    let mesh = stl_io::read_stl(&mut Cursor::new(bytes)).map_err(|e| GeometryError::Parse {
        format: MeshFormat::Stl,
        message: e.to_string(),
    })?;
    let vertices = mesh
        .vertices
        .iter()
        .map(|v| Point::new(v.0[0] as f64, v.0[1] as f64, v.0[2] as f64))
        .collect();
    let triangles = mesh.faces.iter().map(|f| f.vertices).collect();
    Ok((vertices, triangles))
}
