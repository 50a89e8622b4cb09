//! Diagnostics CSV and legacy ASCII VTK snapshots.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use thermovi_core::diagnostics::AngularMomentum;
use thermovi_core::{DiagnosticsRecord, FieldErrors, Mesh, Point, State};

const BASE_COLUMNS: [&str; 9] = ["t", "energy", "Lx", "Ly", "Lz", "Ax", "Ay", "Az", "entropy"];
const ERROR_COLUMNS: [&str; 4] = ["err_phi", "err_Phi", "err_v", "err_theta"];

/// Shortest text with 17 significant digits, exact for binary64.
fn number(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::new(io::ErrorKind::InvalidData, format!("{other:?}")),
    }
}

fn record_fields(dim: usize, r: &DiagnosticsRecord, with_errors: bool) -> Vec<String> {
    let mut fields = vec![number(r.time), number(r.energy)];
    fields.extend((0..3).map(|i| {
        if i < dim {
            number(r.linear[i])
        } else {
            String::new()
        }
    }));
    fields.extend(
        r.angular
            .components()
            .iter()
            .map(|c| c.map(number).unwrap_or_default()),
    );
    fields.push(number(r.entropy));
    if with_errors {
        match &r.errors {
            Some(e) => fields.extend(e.as_array().map(number)),
            None => fields.extend(std::iter::repeat_n(String::new(), 4)),
        }
    }
    fields
}

/// Writes diagnostics for a `dim`-dimensional run. Error columns appear when
/// any record carries field errors.
pub fn write_csv<W: Write>(out: W, dim: usize, records: &[DiagnosticsRecord]) -> io::Result<()> {
    let with_errors = records.iter().any(|r| r.errors.is_some());
    let mut w = csv::Writer::from_writer(out);
    let header = BASE_COLUMNS
        .iter()
        .chain(if with_errors { &ERROR_COLUMNS[..] } else { &[] });
    w.write_record(header).map_err(csv_error)?;
    for r in records {
        w.write_record(record_fields(dim, r, with_errors))
            .map_err(csv_error)?;
    }
    w.flush()
}

pub fn write_csv_file(path: &Path, dim: usize, records: &[DiagnosticsRecord]) -> io::Result<()> {
    write_csv(
        io::BufWriter::new(std::fs::File::create(path)?),
        dim,
        records,
    )
}

/// Parses a diagnostics CSV back into records.
pub fn read_csv(text: &str) -> io::Result<Vec<DiagnosticsRecord>> {
    let bad = |m: String| io::Error::new(io::ErrorKind::InvalidData, m);
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_error)?.clone();
    let with_errors = match header.len() {
        9 => false,
        13 => true,
        n => return Err(bad(format!("unexpected column count {n}"))),
    };
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let field = |i: usize| -> io::Result<Option<f64>> {
            let s = &row[i];
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|e| bad(format!("column {i}: {e}")))
            }
        };
        let required = |i: usize| field(i)?.ok_or_else(|| bad(format!("column {i} is empty")));
        let linear = Point::new(
            field(2)?.unwrap_or(0.0),
            field(3)?.unwrap_or(0.0),
            field(4)?.unwrap_or(0.0),
        );
        let angular = match (field(5)?, field(6)?, field(7)?) {
            (None, None, None) => AngularMomentum::Undefined,
            (None, None, Some(a)) => AngularMomentum::Scalar(a),
            (Some(x), Some(y), Some(z)) => AngularMomentum::Vector(Point::new(x, y, z)),
            _ => return Err(bad("inconsistent angular momentum columns".into())),
        };
        let errors = if with_errors && !row[9].is_empty() {
            Some(FieldErrors {
                displacement: required(9)?,
                thermal: required(10)?,
                velocity: required(11)?,
                temperature: required(12)?,
            })
        } else {
            None
        };
        records.push(DiagnosticsRecord {
            time: required(0)?,
            energy: required(1)?,
            linear,
            angular,
            entropy: required(8)?,
            errors,
        });
    }
    Ok(records)
}

fn cell_type(dim: usize) -> u8 {
    match dim {
        1 => 3,
        2 => 5,
        _ => 10,
    }
}

/// Renders a snapshot as a legacy ASCII unstructured grid.
pub fn vtk_text(mesh: &Mesh, state: &State) -> String {
    let coords = mesh.coords();
    let n = mesh.n_nodes();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "thermovi snapshot t={}", number(state.time));
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n} double");
    for x in coords {
        let _ = writeln!(s, "{} {} {}", number(x.x), number(x.y), number(x.z));
    }
    let per_cell = mesh.dim() + 1;
    let _ = writeln!(
        s,
        "CELLS {} {}",
        mesh.n_elements(),
        mesh.n_elements() * (per_cell + 1)
    );
    for el in mesh.elements() {
        let ids: Vec<String> = el.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "{per_cell} {}", ids.join(" "));
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.n_elements());
    for _ in 0..mesh.n_elements() {
        let _ = writeln!(s, "{}", cell_type(mesh.dim()));
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    s.push_str("VECTORS displacement double\n");
    for (phi, x) in state.motion.iter().zip(coords) {
        let u = phi - x;
        let _ = writeln!(s, "{} {} {}", number(u.x), number(u.y), number(u.z));
    }
    for (name, values) in [
        ("temperature", &state.temperature),
        ("thermal_displacement", &state.thermal),
        ("entropy_momentum", &state.entropy_momentum),
    ] {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in values {
            let _ = writeln!(s, "{}", number(*v));
        }
    }
    s
}

pub fn write_vtk(mesh: &Mesh, state: &State, path: &Path) -> io::Result<()> {
    std::fs::write(path, vtk_text(mesh, state))
}

/// Contents of a legacy unstructured-grid file as written by [`write_vtk`].
#[derive(Debug, Clone, PartialEq)]
pub struct VtkGrid {
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub vectors: Vec<(String, Vec<[f64; 3]>)>,
    pub scalars: Vec<(String, Vec<f64>)>,
}

/// Minimal reader for ASCII unstructured grids with point data.
pub fn read_vtk(text: &str) -> io::Result<VtkGrid> {
    let bad = |m: String| io::Error::new(io::ErrorKind::InvalidData, m);
    let mut lines = text.lines();
    if lines.next() != Some("# vtk DataFile Version 3.0") {
        return Err(bad("missing VTK version header".into()));
    }
    lines.next();
    if lines.next().map(str::trim) != Some("ASCII") {
        return Err(bad("only ASCII files are supported".into()));
    }
    if lines.next().map(str::trim) != Some("DATASET UNSTRUCTURED_GRID") {
        return Err(bad("expected an unstructured grid".into()));
    }
    let mut tokens = lines.flat_map(str::split_whitespace);
    let mut next = |what: &str| {
        tokens
            .next()
            .ok_or_else(|| bad(format!("unexpected end of file reading {what}")))
    };

    fn parse<T: std::str::FromStr>(s: &str) -> io::Result<T> {
        s.parse()
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, format!("bad value `{s}`")))
    }
    fn expect(got: &str, want: &str) -> io::Result<()> {
        if got == want {
            Ok(())
        } else {
            Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("expected `{want}`, got `{got}`"),
            ))
        }
    }

    expect(next("POINTS")?, "POINTS")?;
    let n: usize = parse(next("point count")?)?;
    next("point type")?;
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        points.push([parse(next("x")?)?, parse(next("y")?)?, parse(next("z")?)?]);
    }
    expect(next("CELLS")?, "CELLS")?;
    let n_cells: usize = parse(next("cell count")?)?;
    let size: usize = parse(next("cell list size")?)?;
    let mut cells = Vec::with_capacity(n_cells);
    let mut read = 0;
    for _ in 0..n_cells {
        let k: usize = parse(next("cell size")?)?;
        let ids = (0..k)
            .map(|_| parse(next("cell node")?))
            .collect::<io::Result<Vec<usize>>>()?;
        if ids.iter().any(|&i| i >= n) {
            return Err(bad("cell references a missing point".into()));
        }
        read += k + 1;
        cells.push(ids);
    }
    if read != size {
        return Err(bad(format!(
            "cell list size {size} does not match contents {read}"
        )));
    }
    expect(next("CELL_TYPES")?, "CELL_TYPES")?;
    if parse::<usize>(next("cell type count")?)? != n_cells {
        return Err(bad("cell type count mismatch".into()));
    }
    let cell_types = (0..n_cells)
        .map(|_| parse(next("cell type")?))
        .collect::<io::Result<Vec<u8>>>()?;
    expect(next("POINT_DATA")?, "POINT_DATA")?;
    if parse::<usize>(next("point data count")?)? != n {
        return Err(bad("point data count mismatch".into()));
    }
    let (mut vectors, mut scalars) = (Vec::new(), Vec::new());
    while let Ok(kind) = next("") {
        match kind {
            "VECTORS" => {
                let name = next("name")?.to_string();
                next("type")?;
                let mut v = Vec::with_capacity(n);
                for _ in 0..n {
                    v.push([
                        parse(next("vector")?)?,
                        parse(next("vector")?)?,
                        parse(next("vector")?)?,
                    ]);
                }
                vectors.push((name, v));
            }
            "SCALARS" => {
                let name = next("name")?.to_string();
                next("type")?;
                expect(next("components")?, "1")?;
                expect(next("LOOKUP_TABLE")?, "LOOKUP_TABLE")?;
                next("table")?;
                let v = (0..n)
                    .map(|_| parse(next("scalar")?))
                    .collect::<io::Result<Vec<f64>>>()?;
                scalars.push((name, v));
            }
            other => return Err(bad(format!("unsupported section `{other}`"))),
        }
    }
    Ok(VtkGrid {
        points,
        cells,
        cell_types,
        vectors,
        scalars,
    })
}
