//! ASCII triangle surfaces: `v x y z` and `t i j k` lines (0-based), `#`
//! comments. Coordinates are written with 17 significant digits so that a
//! parse/print cycle is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use fdcrack_core::extension3d::{ExtendedCrack, Point3, TriSurface};
use fdcrack_core::Error as CoreError;

use crate::error::{CliError, CliResult};

/// A parsed surface with the source line of every triangle.
#[derive(Debug, Clone)]
pub struct ParsedSurface {
    pub surface: TriSurface,
    pub triangle_lines: Vec<usize>,
    pub vertex_lines: Vec<usize>,
}

pub fn parse_surface(text: &str, origin: &Path) -> CliResult<ParsedSurface> {
    let err = |line: usize, message: String| CliError::Parse { path: origin.to_path_buf(), line, message };
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut vertex_lines = Vec::new();
    let mut triangle_lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let tag = it.next().unwrap_or_default();
        let fields: Vec<&str> = it.collect();
        if fields.len() != 3 {
            return Err(err(ln, format!("expected 3 fields after `{tag}`, found {}", fields.len())));
        }
        match tag {
            "v" => {
                let mut p = [0.0f64; 3];
                for (c, f) in p.iter_mut().zip(&fields) {
                    *c = f.parse().map_err(|_| err(ln, format!("invalid coordinate `{f}`")))?;
                    if !c.is_finite() {
                        return Err(err(ln, format!("non-finite coordinate `{f}`")));
                    }
                }
                vertices.push(p);
                vertex_lines.push(ln);
            }
            "t" => {
                let mut t = [0usize; 3];
                for (c, f) in t.iter_mut().zip(&fields) {
                    *c = f.parse().map_err(|_| err(ln, format!("invalid vertex index `{f}`")))?;
                }
                triangles.push(t);
                triangle_lines.push(ln);
            }
            other => return Err(err(ln, format!("unknown record `{other}`"))),
        }
    }
    if triangles.is_empty() {
        return Err(CliError::Config(format!("{}: no triangles", origin.display())));
    }
    let surface = TriSurface::new(vertices, triangles).map_err(|e| locate(e, &triangle_lines, origin))?;
    Ok(ParsedSurface { surface, triangle_lines, vertex_lines })
}

/// Attach the source line of the offending triangle to a geometry error.
pub fn locate(e: CoreError, triangle_lines: &[usize], origin: &Path) -> CliError {
    let line = match e {
        CoreError::DegenerateTriangle { index } => triangle_lines.get(index).copied(),
        CoreError::IndexOutOfRange { triangle } | CoreError::NonOrientable { triangle } => {
            triangle_lines.get(triangle).copied()
        }
        _ => None,
    };
    match line {
        Some(line) => CliError::Parse { path: origin.to_path_buf(), line, message: e.to_string() },
        None => CliError::Config(format!("{}: {e}", origin.display())),
    }
}

pub fn read_surface(path: &Path) -> CliResult<ParsedSurface> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_surface(&text, path)
}

fn push_vertex(out: &mut String, p: Point3) {
    writeln!(out, "v {:.16e} {:.16e} {:.16e}", p[0], p[1], p[2]).unwrap();
}

pub fn format_surface(s: &TriSurface) -> String {
    let mut out = String::new();
    for &p in s.vertices() {
        push_vertex(&mut out, p);
    }
    for t in s.triangles() {
        writeln!(out, "t {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    out
}

/// Surface vertices, then one `# apex t` comment and vertex line per apex,
/// then the crack triangles with their propagated winding, then the cone
/// facets.
pub fn format_extension(ext: &ExtendedCrack) -> String {
    let s = ext.surface();
    let mut out = String::new();
    writeln!(out, "# {} vertices, {} apexes, {} crack triangles, {} facets", s.vertices().len(), ext.apexes().len(), s.n_triangles(), ext.facets().len()).unwrap();
    for &p in s.vertices() {
        push_vertex(&mut out, p);
    }
    for (t, &a) in ext.apexes().iter().enumerate() {
        writeln!(out, "# apex {t}").unwrap();
        push_vertex(&mut out, a);
    }
    for (t, &[a, b, c]) in s.triangles().iter().enumerate() {
        let [a, b] = if ext.signs()[t] > 0 { [a, b] } else { [b, a] };
        writeln!(out, "t {a} {b} {c}").unwrap();
    }
    for f in ext.facets() {
        writeln!(out, "t {} {} {}", f[0], f[1], f[2]).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "# square\nv 0 0 0\nv 1 0 0\nv 1 1 0.25\nv 0 1 0\nt 0 1 2\nt 0 3 2\n";

    #[test]
    fn parses_simple_file() {
        let p = parse_surface(TWO, Path::new("s.txt")).unwrap();
        assert_eq!(p.surface.n_triangles(), 2);
        assert_eq!(p.triangle_lines, vec![6, 7]);
        assert_eq!(p.surface.vertices()[2], [1.0, 1.0, 0.25]);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let v = vec![[0.1, 1.0 / 3.0, -2.0e-300], [std::f64::consts::PI, 1e10 + 0.5, 7.0], [-0.3, 0.2, 5e-324]];
        let s = TriSurface::new(v, vec![[0, 1, 2]]).unwrap();
        let text = format_surface(&s);
        let back = parse_surface(&text, Path::new("r")).unwrap().surface;
        for (a, b) in s.vertices().iter().zip(back.vertices()) {
            for k in 0..3 {
                assert_eq!(a[k].to_bits(), b[k].to_bits());
            }
        }
        assert_eq!(format_surface(&back), text);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_surface("v 0 0 0\nv 1 0 x\n", Path::new("f")).unwrap_err();
        assert_eq!(e.to_string(), "f:2: invalid coordinate `x`");
        let e = parse_surface("v 0 0 0\nv 1 0 0\nv 0 1 0\n\nt 0 1 5\n", Path::new("f")).unwrap_err();
        assert!(e.to_string().starts_with("f:5: "), "{e}");
        let e = parse_surface("v 0 0 0\nq 1 2 3\n", Path::new("f")).unwrap_err();
        assert_eq!(e.to_string(), "f:2: unknown record `q`");
        let e = parse_surface("v 0 0\n", Path::new("f")).unwrap_err();
        assert!(e.to_string().starts_with("f:1: expected 3 fields"));
    }

    #[test]
    fn extension_output_lists_apexes() {
        let p = parse_surface(TWO, Path::new("s")).unwrap();
        let ext = fdcrack_core::extension3d::build_extension(p.surface, 1).unwrap();
        let text = format_extension(&ext);
        assert_eq!(text.lines().filter(|l| l.starts_with("# apex")).count(), 2);
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 6);
        assert_eq!(text.lines().filter(|l| l.starts_with("t ")).count(), 2 + 6);
        // The second triangle's winding is flipped to agree with the first.
        assert!(text.contains("\nt 3 0 2\n"));
    }
}
