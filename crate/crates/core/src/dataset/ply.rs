//! PLY point clouds: ASCII and binary (both endiannesses).
//!
//! Only `x`, `y`, `z` of the `vertex` element are kept. Other properties,
//! list properties and elements are parsed and skipped.

use std::path::Path;

use nalgebra::Vector3;

use super::{read_file, write_file, DatasetError};
use crate::dataset::bop::{load_models_info, object_id_from_path};
use crate::pose_metrics::{model_diameter, ModelPoints};

/// Above this many vertices the computed diameter cross-check is skipped.
const DIAMETER_CHECK_LIMIT: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
    BinaryBigEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn is_float(self) -> bool {
        matches!(self, Scalar::F32 | Scalar::F64)
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    body_offset: usize,
    /// 1-based line number of the first body line.
    body_line: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header, DatasetError> {
    let mut offset = 0;
    let mut line_no = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let Some(end) = bytes[offset..].iter().position(|&b| b == b'\n') else {
            return Err(DatasetError::record(path, "header", "missing end_header"));
        };
        let raw = &bytes[offset..offset + end];
        offset += end + 1;
        line_no += 1;
        let location = format!("header line {line_no}");
        let line = std::str::from_utf8(raw)
            .map_err(|_| DatasetError::record(path, &location, "header is not UTF-8"))?
            .trim_end_matches('\r');
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if line_no == 1 {
            if line != "ply" {
                return Err(DatasetError::record(path, location, "missing 'ply' magic"));
            }
            continue;
        }
        match tokens.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, _version] => {
                encoding = Some(match *fmt {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    "binary_big_endian" => PlyEncoding::BinaryBigEndian,
                    other => {
                        return Err(DatasetError::record(
                            path,
                            location,
                            format!("unknown format {other:?}"),
                        ))
                    }
                });
            }
            ["element", name, count] => {
                let count = count.parse().map_err(|_| {
                    DatasetError::record(path, &location, format!("bad element count {count:?}"))
                })?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", count, item, _name] => {
                let (Some(count), Some(item)) = (Scalar::parse(count), Scalar::parse(item)) else {
                    return Err(DatasetError::record(
                        path,
                        location,
                        "unknown list property type",
                    ));
                };
                if count.is_float() {
                    return Err(DatasetError::record(
                        path,
                        location,
                        "list count must be an integer type",
                    ));
                }
                let element = elements.last_mut().ok_or_else(|| {
                    DatasetError::record(path, &location, "property before any element")
                })?;
                element.properties.push(Property::List { count, item });
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty).ok_or_else(|| {
                    DatasetError::record(path, &location, format!("unknown property type {ty:?}"))
                })?;
                let element = elements.last_mut().ok_or_else(|| {
                    DatasetError::record(path, &location, "property before any element")
                })?;
                element.properties.push(Property::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            ["end_header"] => break,
            _ => {
                return Err(DatasetError::record(
                    path,
                    location,
                    format!("unrecognized header line {line:?}"),
                ))
            }
        }
    }
    let encoding =
        encoding.ok_or_else(|| DatasetError::record(path, "header", "missing format line"))?;
    Ok(Header {
        encoding,
        elements,
        body_offset: offset,
        body_line: line_no + 1,
    })
}

/// Positions of x, y, z within the vertex element's properties.
fn xyz_indices(path: &Path, vertex: &Element) -> Result<[usize; 3], DatasetError> {
    let mut out = [usize::MAX; 3];
    for (i, prop) in vertex.properties.iter().enumerate() {
        if let Property::Scalar { name, ty } = prop {
            let slot = match name.as_str() {
                "x" => 0,
                "y" => 1,
                "z" => 2,
                _ => continue,
            };
            if !ty.is_float() {
                return Err(DatasetError::record(
                    path,
                    "header",
                    format!("vertex property {name} must be float or double"),
                ));
            }
            out[slot] = i;
        }
    }
    if out.contains(&usize::MAX) {
        return Err(DatasetError::record(
            path,
            "header",
            "vertex element lacks x, y or z",
        ));
    }
    Ok(out)
}

/// Reads vertex positions in file order.
pub fn read_ply_points(path: impl AsRef<Path>) -> Result<Vec<Vector3<f64>>, DatasetError> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    parse_ply(path, &bytes)
}

fn parse_ply(path: &Path, bytes: &[u8]) -> Result<Vec<Vector3<f64>>, DatasetError> {
    let header = parse_header(path, bytes)?;
    let vertex_pos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| DatasetError::record(path, "header", "no vertex element"))?;
    let vertex = &header.elements[vertex_pos];
    if vertex.count == 0 {
        return Err(DatasetError::record(
            path,
            "header",
            "vertex element is empty",
        ));
    }
    let xyz = xyz_indices(path, vertex)?;
    let body = &bytes[header.body_offset..];
    match header.encoding {
        PlyEncoding::Ascii => parse_ascii(
            path,
            body,
            header.body_line,
            &header.elements[..=vertex_pos],
            xyz,
        ),
        enc => {
            let big = enc == PlyEncoding::BinaryBigEndian;
            parse_binary(
                path,
                body,
                header.body_offset,
                big,
                &header.elements[..=vertex_pos],
                xyz,
            )
        }
    }
}

fn parse_ascii(
    path: &Path,
    body: &[u8],
    first_line: usize,
    elements: &[Element],
    xyz: [usize; 3],
) -> Result<Vec<Vector3<f64>>, DatasetError> {
    let text = std::str::from_utf8(body)
        .map_err(|_| DatasetError::record(path, "body", "ASCII body is not UTF-8"))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (last, preceding) = elements.split_last().expect("vertex element present");
    let mut next_line = |what: &str| {
        lines
            .next()
            .map(|(i, l)| (first_line + i, l))
            .ok_or_else(|| {
                DatasetError::record(path, "body", format!("file ends inside {what} data"))
            })
    };
    for element in preceding {
        for _ in 0..element.count {
            next_line(&element.name)?;
        }
    }
    let mut points = Vec::with_capacity(last.count);
    for _ in 0..last.count {
        let (line_no, line) = next_line("vertex")?;
        let location = format!("line {line_no}");
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let mut values = Vec::with_capacity(last.properties.len());
        let mut cursor = 0;
        for prop in &last.properties {
            match prop {
                Property::Scalar { .. } => {
                    let token = tokens
                        .get(cursor)
                        .ok_or_else(|| DatasetError::record(path, &location, "too few values"))?;
                    let v: f64 = token.parse().map_err(|_| {
                        DatasetError::record(path, &location, format!("bad number {token:?}"))
                    })?;
                    values.push(v);
                    cursor += 1;
                }
                Property::List { .. } => {
                    let token = tokens
                        .get(cursor)
                        .ok_or_else(|| DatasetError::record(path, &location, "too few values"))?;
                    let n: usize = token.parse().map_err(|_| {
                        DatasetError::record(path, &location, format!("bad list length {token:?}"))
                    })?;
                    values.push(f64::NAN);
                    cursor += 1 + n;
                }
            }
        }
        if cursor > tokens.len() {
            return Err(DatasetError::record(path, &location, "too few values"));
        }
        points.push(Vector3::new(values[xyz[0]], values[xyz[1]], values[xyz[2]]));
    }
    check_finite(path, &points)?;
    Ok(points)
}

struct ByteReader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
    base: usize,
    big: bool,
}

impl ByteReader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], DatasetError> {
        let end = self.pos + N;
        let slice = self.bytes.get(self.pos..end).ok_or_else(|| {
            DatasetError::record(
                self.path,
                format!("byte {}", self.base + self.pos),
                "unexpected end of binary data",
            )
        })?;
        self.pos = end;
        Ok(slice.try_into().expect("slice of length N"))
    }

    fn read(&mut self, ty: Scalar) -> Result<f64, DatasetError> {
        macro_rules! num {
            ($t:ty) => {{
                let b = self.take::<{ std::mem::size_of::<$t>() }>()?;
                (if self.big {
                    <$t>::from_be_bytes(b)
                } else {
                    <$t>::from_le_bytes(b)
                }) as f64
            }};
        }
        Ok(match ty {
            Scalar::I8 => num!(i8),
            Scalar::U8 => num!(u8),
            Scalar::I16 => num!(i16),
            Scalar::U16 => num!(u16),
            Scalar::I32 => num!(i32),
            Scalar::U32 => num!(u32),
            Scalar::F32 => num!(f32),
            Scalar::F64 => num!(f64),
        })
    }

    fn skip_property(&mut self, prop: &Property) -> Result<(), DatasetError> {
        match prop {
            Property::Scalar { ty, .. } => self.skip(ty.size()),
            Property::List { count, item } => {
                let n = self.read(*count)?;
                if n < 0.0 {
                    return Err(DatasetError::record(
                        self.path,
                        format!("byte {}", self.base + self.pos),
                        "negative list length",
                    ));
                }
                self.skip(n as usize * item.size())
            }
        }
    }

    fn skip(&mut self, n: usize) -> Result<(), DatasetError> {
        if self.pos + n > self.bytes.len() {
            return Err(DatasetError::record(
                self.path,
                format!("byte {}", self.base + self.pos),
                "unexpected end of binary data",
            ));
        }
        self.pos += n;
        Ok(())
    }
}

fn parse_binary(
    path: &Path,
    body: &[u8],
    base: usize,
    big: bool,
    elements: &[Element],
    xyz: [usize; 3],
) -> Result<Vec<Vector3<f64>>, DatasetError> {
    let mut reader = ByteReader {
        path,
        bytes: body,
        pos: 0,
        base,
        big,
    };
    let (last, preceding) = elements.split_last().expect("vertex element present");
    for element in preceding {
        for _ in 0..element.count {
            for prop in &element.properties {
                reader.skip_property(prop)?;
            }
        }
    }
    let mut points = Vec::with_capacity(last.count);
    let mut coords = [0.0; 3];
    for _ in 0..last.count {
        for (i, prop) in last.properties.iter().enumerate() {
            match prop {
                Property::Scalar { ty, .. } if xyz.contains(&i) => {
                    let v = reader.read(*ty)?;
                    coords[xyz.iter().position(|&j| j == i).expect("index in xyz")] = v;
                }
                other => reader.skip_property(other)?,
            }
        }
        points.push(Vector3::from(coords));
    }
    check_finite(path, &points)?;
    Ok(points)
}

fn check_finite(path: &Path, points: &[Vector3<f64>]) -> Result<(), DatasetError> {
    match points.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
        Some(i) => Err(DatasetError::record(
            path,
            format!("vertex {i}"),
            "non-finite coordinate",
        )),
        None => Ok(()),
    }
}

/// Loads a model. The diameter comes from a sibling `models_info.json`
/// when it lists this object, otherwise it is computed from the vertices.
pub fn load_ply_model(path: impl AsRef<Path>) -> Result<ModelPoints, DatasetError> {
    let path = path.as_ref();
    let info = path
        .parent()
        .map(|d| d.join("models_info.json"))
        .filter(|p| p.is_file());
    let diameter = match (info, object_id_from_path(path)) {
        (Some(info), Some(id)) => load_models_info(&info)?.get(&id).copied(),
        _ => None,
    };
    load_ply_model_with_diameter(path, diameter)
}

pub(crate) fn load_ply_model_with_diameter(
    path: &Path,
    diameter: Option<f64>,
) -> Result<ModelPoints, DatasetError> {
    let points = read_ply_points(path)?;
    let to_record =
        |e: crate::pose_metrics::MetricError| DatasetError::record(path, "model", e.to_string());
    match diameter {
        Some(d) => {
            if points.len() <= DIAMETER_CHECK_LIMIT {
                let computed = model_diameter(&points).map_err(to_record)?;
                log::debug!(
                    "{}: diameter {d} listed, {computed} computed",
                    path.display()
                );
            }
            ModelPoints::new(points, d, false).map_err(to_record)
        }
        None => ModelPoints::with_computed_diameter(points, false).map_err(to_record),
    }
}

/// Writes `points` as a vertex-only PLY with `double` coordinates, so
/// reading it back is exact.
pub fn write_ply(
    path: impl AsRef<Path>,
    points: &[Vector3<f64>],
    encoding: PlyEncoding,
) -> Result<(), DatasetError> {
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
        PlyEncoding::BinaryBigEndian => "binary_big_endian",
    };
    let mut out = format!(
        "ply\nformat {format} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        points.len()
    )
    .into_bytes();
    for p in points {
        match encoding {
            PlyEncoding::Ascii => {
                out.extend_from_slice(format!("{} {} {}\n", p.x, p.y, p.z).as_bytes())
            }
            PlyEncoding::BinaryLittleEndian => p
                .iter()
                .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            PlyEncoding::BinaryBigEndian => p
                .iter()
                .for_each(|v| out.extend_from_slice(&v.to_be_bytes())),
        }
    }
    write_file(path.as_ref(), &out)
}
