//! ASCII point-cloud formats: a PLY subset, plain XYZ rows, and labeled rows.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{LabeledCloud, Point3, PointCloud, SemanticLabel};

pub const LABELED_HEADER: &str = "# greenseg-labeled v1";

/// Frame id given to clouds whose file does not name one.
pub const DEFAULT_FRAME: &str = "sensor";

/// A parsed cloud plus the number of rows dropped for non-finite coordinates.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub cloud: T,
    pub dropped: usize,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads an ASCII PLY or XYZ file, dropping rows with non-finite coordinates.
pub fn read_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let loaded = parse_cloud(&read_text(path)?, path)?;
    if loaded.dropped > 0 {
        log::warn!("{}: dropped {} non-finite points", path.display(), loaded.dropped);
    }
    Ok(loaded.cloud)
}

/// Parses PLY if the text starts with `ply`, XYZ rows otherwise.
pub fn parse_cloud(text: &str, path: &Path) -> Result<Loaded<PointCloud>> {
    let loaded = if text.trim_start().starts_with("ply") {
        parse_ply(text, path)?
    } else {
        parse_xyz(text, path)?
    };
    if loaded.cloud.is_empty() {
        return Err(Error::EmptyCloud {
            path: path.to_path_buf(),
        });
    }
    Ok(loaded)
}

fn field(path: &Path, line: usize, tok: Option<&str>, what: &str) -> Result<f64> {
    let tok = tok.ok_or_else(|| Error::parse(path, line, format!("missing {what}")))?;
    tok.parse::<f64>()
        .map_err(|_| Error::parse(path, line, format!("invalid {what} `{tok}`")))
}

fn frame_comment(line: &str) -> Option<&str> {
    let rest = line.strip_prefix('#').unwrap_or(line).trim();
    rest.strip_prefix("frame_id").map(str::trim).filter(|s| !s.is_empty())
}

struct PlyElement {
    name: String,
    count: usize,
    props: Vec<String>,
}

fn parse_ply(text: &str, path: &Path) -> Result<Loaded<PointCloud>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut frame = DEFAULT_FRAME.to_string();
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut ended = false;
    let mut last_line = 0;
    for (n, line) in lines.by_ref() {
        last_line = n;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("ply") | None => {}
            Some("format") => {
                if tok.next() != Some("ascii") {
                    return Err(Error::parse(path, n, "only ascii PLY is supported"));
                }
            }
            Some("comment") => {
                if let Some(f) = frame_comment(line["comment".len()..].trim()) {
                    frame = f.to_string();
                }
            }
            Some("obj_info") => {}
            Some("element") => {
                let name = tok.next().unwrap_or_default().to_string();
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::parse(path, n, "element needs a count"))?;
                elements.push(PlyElement {
                    name,
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(path, n, "property before any element"))?;
                let parts: Vec<&str> = tok.collect();
                if parts.first() == Some(&"list") {
                    if el.name == "vertex" {
                        return Err(Error::parse(path, n, "list properties on vertices are not supported"));
                    }
                    el.props.push(String::new());
                } else {
                    el.props.push(parts.last().copied().unwrap_or_default().to_string());
                }
            }
            Some("end_header") => {
                ended = true;
                break;
            }
            Some(other) => return Err(Error::parse(path, n, format!("unexpected header keyword `{other}`"))),
        }
    }
    if !ended {
        return Err(Error::parse(path, text.lines().count().max(1), "missing end_header"));
    }
    let mut points = Vec::new();
    let mut dropped = 0;
    for el in &elements {
        let axes = if el.name == "vertex" {
            let pos = |a: &str| el.props.iter().position(|p| p == a);
            match (pos("x"), pos("y"), pos("z")) {
                (Some(x), Some(y), Some(z)) => Some([x, y, z]),
                _ => return Err(Error::parse(path, 1, "vertex element lacks x, y, z properties")),
            }
        } else {
            None
        };
        for _ in 0..el.count {
            let (n, line) = lines.next().ok_or_else(|| {
                Error::parse(
                    path,
                    last_line + 1,
                    format!("unexpected end of file in `{}` data", el.name),
                )
            })?;
            last_line = n;
            let Some(axes) = axes else { continue };
            let cols: Vec<&str> = line.split_whitespace().collect();
            let mut xyz = [0.0; 3];
            for (k, &c) in axes.iter().enumerate() {
                xyz[k] = field(path, n, cols.get(c).copied(), ["x", "y", "z"][k])?;
            }
            push_finite(&mut points, &mut dropped, xyz);
        }
    }
    Ok(Loaded {
        cloud: PointCloud::new(points, frame)?,
        dropped,
    })
}

fn push_finite(points: &mut Vec<Point3>, dropped: &mut usize, xyz: [f64; 3]) {
    if xyz.iter().all(|v| v.is_finite()) {
        points.push(Point3::from(xyz));
    } else {
        *dropped += 1;
    }
}

fn parse_xyz(text: &str, path: &Path) -> Result<Loaded<PointCloud>> {
    let mut frame = DEFAULT_FRAME.to_string();
    let mut points = Vec::new();
    let mut dropped = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(f) = frame_comment(line) {
                frame = f.to_string();
            }
            continue;
        }
        let mut tok = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty());
        let xyz = [
            field(path, i + 1, tok.next(), "x")?,
            field(path, i + 1, tok.next(), "y")?,
            field(path, i + 1, tok.next(), "z")?,
        ];
        push_finite(&mut points, &mut dropped, xyz);
    }
    Ok(Loaded {
        cloud: PointCloud::new(points, frame)?,
        dropped,
    })
}

pub fn ply_string(cloud: &PointCloud) -> String {
    let mut s = format!(
        "ply\nformat ascii 1.0\ncomment frame_id {}\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        cloud.frame_id(),
        cloud.len()
    );
    for p in cloud.points() {
        let _ = writeln!(s, "{:.6} {:.6} {:.6}", p.x, p.y, p.z);
    }
    s
}

pub fn write_ply(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    write_text(path.as_ref(), &ply_string(cloud))
}

/// Plain `x y z` rows with a frame comment.
pub fn write_xyz(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let mut s = format!("# frame_id {}\n", cloud.frame_id());
    for p in cloud.points() {
        let _ = writeln!(s, "{:.6} {:.6} {:.6}", p.x, p.y, p.z);
    }
    write_text(path.as_ref(), &s)
}

pub fn labeled_string(cloud: &LabeledCloud) -> String {
    let mut s = format!("{LABELED_HEADER}\n# frame_id {}\n", cloud.frame_id());
    for (p, l) in cloud.iter() {
        let _ = writeln!(s, "{:.6} {:.6} {:.6} {}", p.x, p.y, p.z, l.code());
    }
    s
}

pub fn write_labeled(path: impl AsRef<Path>, cloud: &LabeledCloud) -> Result<()> {
    write_text(path.as_ref(), &labeled_string(cloud))
}

pub fn read_labeled(path: impl AsRef<Path>) -> Result<LabeledCloud> {
    let path = path.as_ref();
    let loaded = parse_labeled(&read_text(path)?, path)?;
    if loaded.dropped > 0 {
        log::warn!("{}: dropped {} non-finite points", path.display(), loaded.dropped);
    }
    Ok(loaded.cloud)
}

/// True if `text` starts with the labeled-cloud header.
pub fn is_labeled(text: &str) -> bool {
    text.starts_with(LABELED_HEADER)
}

pub fn parse_labeled(text: &str, path: &Path) -> Result<Loaded<LabeledCloud>> {
    if !is_labeled(text) {
        return Err(Error::parse(path, 1, format!("expected `{LABELED_HEADER}` header")));
    }
    let mut frame = DEFAULT_FRAME.to_string();
    let (mut points, mut labels) = (Vec::new(), Vec::new());
    let mut dropped = 0;
    for (i, line) in text.lines().enumerate().skip(1) {
        let n = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(f) = frame_comment(line) {
                frame = f.to_string();
            }
            continue;
        }
        let mut tok = line.split_whitespace();
        let xyz = [
            field(path, n, tok.next(), "x")?,
            field(path, n, tok.next(), "y")?,
            field(path, n, tok.next(), "z")?,
        ];
        let code = tok.next().ok_or_else(|| Error::parse(path, n, "missing label"))?;
        let label = code
            .parse::<u8>()
            .ok()
            .and_then(SemanticLabel::from_code)
            .ok_or_else(|| Error::parse(path, n, format!("unknown label code `{code}`")))?;
        if tok.next().is_some() {
            return Err(Error::parse(path, n, "expected `x y z label`"));
        }
        if xyz.iter().all(|v| v.is_finite()) {
            points.push(Point3::from(xyz));
            labels.push(label);
        } else {
            dropped += 1;
        }
    }
    Ok(Loaded {
        cloud: LabeledCloud::new(points, labels, frame, None)?,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use SemanticLabel::*;

    fn p() -> &'static Path {
        Path::new("mem.ply")
    }

    #[test]
    fn three_vertex_ply() {
        let text = "ply\nformat ascii 1.0\ncomment frame_id camera\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 0 0\n0 1 0\n";
        let c = parse_cloud(text, p()).unwrap().cloud;
        assert_eq!(c.len(), 3);
        assert_eq!(c.points()[1], Point3::new(1.0, 0.0, 0.0));
        assert_eq!(c.frame_id(), "camera");
    }

    #[test]
    fn ply_with_extra_properties_and_faces() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty uchar red\nproperty float z\nproperty float y\nproperty float x\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n255 3 2 1\n0 6 5 4\n3 0 1 1\n";
        let c = parse_cloud(text, p()).unwrap().cloud;
        assert_eq!(c.points(), &[Point3::new(1.0, 2.0, 3.0), Point3::new(4.0, 5.0, 6.0)]);
    }

    #[test]
    fn nan_row_dropped_and_counted() {
        let l = parse_cloud("nan 0 0\n1 2 3\n", Path::new("a.xyz")).unwrap();
        assert_eq!((l.cloud.len(), l.dropped), (1, 1));
    }

    #[test]
    fn empty_and_malformed_inputs() {
        let empty = "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
        assert!(matches!(parse_cloud(empty, p()), Err(Error::EmptyCloud { .. })));
        let err = parse_cloud("1 2 3\n4 five 6\n", Path::new("b.xyz")).unwrap_err();
        assert_eq!(err.to_string(), "b.xyz:2: invalid y `five`");
        let short = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n";
        assert!(matches!(parse_cloud(short, p()), Err(Error::Parse { line: 9, .. })));
        let binary = "ply\nformat binary_little_endian 1.0\nend_header\n";
        assert!(matches!(parse_cloud(binary, p()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn single_ground_point_file() {
        let c = LabeledCloud::new(vec![Point3::new(1.0, 2.0, 0.0)], vec![Ground], "base_link", None).unwrap();
        let s = labeled_string(&c);
        assert!(s.lines().last().unwrap().ends_with(" 0"));
        assert_eq!(s.lines().filter(|l| !l.starts_with('#')).count(), 1);
    }

    #[test]
    fn mixed_classes_roundtrip() {
        let labels = vec![Ground, Obstacle, Above, Noise, Ground, Obstacle, Above, Undefined];
        let pts = (0..8).map(|i| Point3::new(i as f64, 0.5, -0.25)).collect();
        let c = LabeledCloud::new(pts, labels, "base_link", None).unwrap();
        let back = parse_labeled(&labeled_string(&c), p()).unwrap().cloud;
        assert_eq!(back, c);
    }

    #[test]
    fn random_roundtrip_within_a_micrometer() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pts: Vec<_> = (0..1000)
            .map(|_| {
                Point3::new(
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-1.0..2.0),
                )
            })
            .collect();
        let labels: Vec<_> = (0..1000)
            .map(|_| SemanticLabel::CLASSES[rng.random_range(0..4)])
            .collect();
        let c = LabeledCloud::new(pts, labels, "base_link", None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.txt");
        write_labeled(&file, &c).unwrap();
        let back = read_labeled(&file).unwrap();
        assert_eq!(back.labels(), c.labels());
        assert_eq!(back.frame_id(), "base_link");
        for (a, b) in back.points().iter().zip(c.points()) {
            assert!((a - b).abs().max() <= 5e-7 + 1e-12);
        }
    }

    #[test]
    fn ply_writer_roundtrip() {
        let c = PointCloud::new(vec![Point3::new(0.1, -0.2, 0.3)], "camera").unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_ply(dir.path().join("c.ply"), &c).unwrap();
        assert_eq!(read_cloud(dir.path().join("c.ply")).unwrap(), c);
        write_xyz(dir.path().join("c.xyz"), &c).unwrap();
        assert_eq!(read_cloud(dir.path().join("c.xyz")).unwrap(), c);
    }

    #[test]
    fn bad_label_code_reports_line() {
        let err = parse_labeled("# greenseg-labeled v1\n0 0 0 0\n0 0 0 7\n", Path::new("l.txt")).unwrap_err();
        assert!(err.to_string().starts_with("l.txt:3:"), "{err}");
    }
}
