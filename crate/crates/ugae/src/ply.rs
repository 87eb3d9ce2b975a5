//! PLY reader/writer for voxelized clouds.
//!
//! Supports ASCII and binary-little-endian files with a vertex element
//! carrying `x,y,z` (float or integer) and optionally `red,green,blue`
//! (uchar). Extra vertex properties are skipped. Coordinates must be
//! non-negative integers (floats are accepted when integral within 1e-6);
//! the grid depth is inferred as the smallest `d` with all coordinates
//! below `2^d`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::cloud::{CloudError, PointCloud, MAX_DEPTH};

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("malformed vertex data: {0}")]
    Data(String),
    #[error("coordinate {value} on vertex {index} is not integral")]
    NonIntegralCoordinate { index: usize, value: f64 },
    #[error("coordinate {value} on vertex {index} is negative")]
    NegativeCoordinate { index: usize, value: f64 },
    #[error("coordinates exceed the {max} grid limit", max = (1u32 << MAX_DEPTH) - 1)]
    GridTooLarge,
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read_le(self, bytes: &[u8]) -> f64 {
        match self {
            Self::I8 => bytes[0] as i8 as f64,
            Self::U8 => bytes[0] as f64,
            Self::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Self::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Self::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Ascii,
    BinaryLe,
}

struct Header {
    format: Format,
    vertex_count: usize,
    properties: Vec<(String, ScalarType)>,
    body_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, PlyError> {
    let head_end = find_header_end(bytes)
        .ok_or_else(|| PlyError::Header("missing end_header".to_string()))?;
    let text = std::str::from_utf8(&bytes[..head_end])
        .map_err(|_| PlyError::Header("header is not valid UTF-8".to_string()))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(PlyError::Header("missing ply magic line".to_string()));
    }
    let mut format = None;
    let mut vertex_count = None;
    let mut properties = Vec::new();
    let mut in_vertex_element = false;
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with("comment") || line.starts_with("obj_info") {
            continue;
        }
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                format = Some(match tok.next() {
                    Some("ascii") => Format::Ascii,
                    Some("binary_little_endian") => Format::BinaryLe,
                    other => {
                        return Err(PlyError::Header(format!(
                            "unsupported format {other:?}"
                        )))
                    }
                });
            }
            Some("element") => {
                let name = tok.next().unwrap_or_default();
                let count: usize = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| PlyError::Header(format!("bad element line: {line}")))?;
                if name == "vertex" {
                    if vertex_count.is_some() {
                        return Err(PlyError::Header("duplicate vertex element".to_string()));
                    }
                    vertex_count = Some(count);
                    in_vertex_element = true;
                } else {
                    if count > 0 {
                        return Err(PlyError::Header(format!(
                            "unsupported element \"{name}\" with {count} entries"
                        )));
                    }
                    in_vertex_element = false;
                }
            }
            Some("property") => {
                if !in_vertex_element {
                    continue;
                }
                let ty = tok.next().unwrap_or_default();
                if ty == "list" {
                    return Err(PlyError::Header(
                        "list properties are not supported on vertices".to_string(),
                    ));
                }
                let scalar = ScalarType::parse(ty)
                    .ok_or_else(|| PlyError::Header(format!("unknown property type {ty}")))?;
                let name = tok
                    .next()
                    .ok_or_else(|| PlyError::Header(format!("bad property line: {line}")))?;
                properties.push((name.to_string(), scalar));
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(PlyError::Header(format!("unexpected keyword {other}")));
            }
            None => {}
        }
    }
    let format = format.ok_or_else(|| PlyError::Header("missing format line".to_string()))?;
    let vertex_count =
        vertex_count.ok_or_else(|| PlyError::Header("missing vertex element".to_string()))?;
    Ok(Header {
        format,
        vertex_count,
        properties,
        body_offset: head_end,
    })
}

fn find_header_end(bytes: &[u8]) -> Option<usize> {
    let needle = b"end_header";
    let pos = bytes
        .windows(needle.len())
        .position(|w| w == needle)?;
    let after = &bytes[pos + needle.len()..];
    let nl = after.iter().position(|&b| b == b'\n')?;
    Some(pos + needle.len() + nl + 1)
}

/// Load a point cloud from a PLY file.
pub fn load_ply(path: impl AsRef<Path>) -> Result<PointCloud, PlyError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    load_ply_bytes(&bytes)
}

pub fn load_ply_bytes(bytes: &[u8]) -> Result<PointCloud, PlyError> {
    let header = parse_header(bytes)?;
    let names: Vec<&str> = header.properties.iter().map(|(n, _)| n.as_str()).collect();
    let idx = |name: &str| names.iter().position(|&n| n == name);
    let (ix, iy, iz) = match (idx("x"), idx("y"), idx("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err(PlyError::Header(
                "vertex element must carry x, y, z".to_string(),
            ))
        }
    };
    let color_idx = match (idx("red"), idx("green"), idx("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        (None, None, None) => None,
        _ => {
            return Err(PlyError::Header(
                "color requires all of red, green, blue".to_string(),
            ))
        }
    };

    let mut rows = vec![0f64; header.properties.len()];
    let mut coords = Vec::with_capacity(header.vertex_count);
    let mut attrs = color_idx.map(|_| Vec::with_capacity(header.vertex_count));
    let body = &bytes[header.body_offset..];
    let mut cursor = 0usize;
    let mut ascii_tokens = match header.format {
        Format::Ascii => Some(
            std::str::from_utf8(body)
                .map_err(|_| PlyError::Data("ascii body is not valid UTF-8".to_string()))?
                .split_whitespace(),
        ),
        Format::BinaryLe => None,
    };
    for vertex in 0..header.vertex_count {
        match header.format {
            Format::Ascii => {
                let tokens = ascii_tokens.as_mut().unwrap();
                for (slot, (name, _)) in rows.iter_mut().zip(&header.properties) {
                    let tok = tokens.next().ok_or_else(|| {
                        PlyError::Data(format!("vertex {vertex} is truncated"))
                    })?;
                    *slot = tok.parse::<f64>().map_err(|_| {
                        PlyError::Data(format!(
                            "vertex {vertex} property {name}: cannot parse {tok:?}"
                        ))
                    })?;
                }
            }
            Format::BinaryLe => {
                for (slot, (_, ty)) in rows.iter_mut().zip(&header.properties) {
                    let size = ty.size();
                    let end = cursor + size;
                    if end > body.len() {
                        return Err(PlyError::Data(format!(
                            "binary body ends inside vertex {vertex}"
                        )));
                    }
                    *slot = ty.read_le(&body[cursor..end]);
                    cursor = end;
                }
            }
        }
        let mut coord = [0u32; 3];
        for (axis, &i) in [ix, iy, iz].iter().enumerate() {
            let value = rows[i];
            if value < 0.0 {
                return Err(PlyError::NegativeCoordinate {
                    index: vertex,
                    value,
                });
            }
            if (value - value.round()).abs() > 1e-6 {
                return Err(PlyError::NonIntegralCoordinate {
                    index: vertex,
                    value,
                });
            }
            let rounded = value.round();
            if rounded >= (1u64 << MAX_DEPTH) as f64 {
                return Err(PlyError::GridTooLarge);
            }
            coord[axis] = rounded as u32;
        }
        coords.push(coord);
        if let (Some(attrs), Some(ci)) = (attrs.as_mut(), color_idx) {
            attrs.push([rows[ci[0]] as u8, rows[ci[1]] as u8, rows[ci[2]] as u8]);
        }
    }
    let depth = infer_depth(&coords);
    Ok(PointCloud::new(coords, attrs, depth)?)
}

/// Smallest depth whose grid contains every coordinate, at least 1.
fn infer_depth(coords: &[[u32; 3]]) -> u8 {
    let max = coords
        .iter()
        .flat_map(|c| c.iter().copied())
        .max()
        .unwrap_or(0);
    let mut depth = 1u8;
    while (1u32 << depth) <= max {
        depth += 1;
    }
    depth
}

/// Save a point cloud as PLY. Binary mode writes `binary_little_endian`
/// with float coordinates, which is exact for the 16-bit grids this
/// toolkit supports; a reload reproduces coordinates and attributes
/// bit for bit.
pub fn save_ply(
    cloud: &PointCloud,
    path: impl AsRef<Path>,
    binary: bool,
) -> Result<(), PlyError> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&ply_bytes(cloud, binary))?;
    Ok(())
}

/// The exact bytes [`save_ply`] writes.
pub fn ply_bytes(cloud: &PointCloud, binary: bool) -> Vec<u8> {
    let mut buf = Vec::new();
    let format = if binary {
        "binary_little_endian"
    } else {
        "ascii"
    };
    buf.extend_from_slice(b"ply\n");
    buf.extend_from_slice(format!("format {format} 1.0\n").as_bytes());
    buf.extend_from_slice(format!("element vertex {}\n", cloud.len()).as_bytes());
    buf.extend_from_slice(b"property float x\nproperty float y\nproperty float z\n");
    if cloud.attrs().is_some() {
        buf.extend_from_slice(
            b"property uchar red\nproperty uchar green\nproperty uchar blue\n",
        );
    }
    buf.extend_from_slice(b"end_header\n");
    for (i, c) in cloud.coords().iter().enumerate() {
        let rgb = cloud.attrs().map(|a| a[i]);
        if binary {
            for &x in c {
                buf.extend_from_slice(&(x as f32).to_le_bytes());
            }
            if let Some(rgb) = rgb {
                buf.extend_from_slice(&rgb);
            }
        } else {
            match rgb {
                Some(rgb) => buf.extend_from_slice(
                    format!(
                        "{} {} {} {} {} {}\n",
                        c[0], c[1], c[2], rgb[0], rgb[1], rgb[2]
                    )
                    .as_bytes(),
                ),
                None => {
                    buf.extend_from_slice(format!("{} {} {}\n", c[0], c[1], c[2]).as_bytes())
                }
            }
        }
    }
    buf
}
