//! File containers: one shared layout for every binary artifact, plus PGM
//! quicklook export.
//!
//! A container is a text header terminated by a blank line, then a float32
//! little-endian payload:
//!
//! ```text
//! FMSTCT 1
//! kind=image
//! dims=256 256
//! key=value            # any number of metadata lines, in write order
//!
//! <dims.product() * 4 bytes of f32 LE, row-major>
//! ```

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::ScanConfig;
use crate::phantom::ImageGrid;
use crate::projector::Sinogram;
use crate::redundancy::WeightMap;

const MAGIC: &str = "FMSTCT 1";

/// Parsed container header.
#[derive(Debug, Clone)]
pub struct Header {
    pub kind: String,
    pub dims: Vec<usize>,
    /// Metadata lines in file order (duplicate keys preserved).
    pub fields: Vec<(String, String)>,
}

impl Header {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn parse_field<T: std::str::FromStr>(&self, key: &str, path: &Path) -> Result<T> {
        self.get(key)
            .ok_or_else(|| container_err(path, format!("missing header field `{key}`")))?
            .parse()
            .map_err(|_| container_err(path, format!("unparsable header field `{key}`")))
    }
}

fn container_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Container { path: path.to_path_buf(), message: message.into() }
}

/// Writes a container with the given kind, dimensions and metadata.
pub fn write(
    path: &Path,
    kind: &str,
    dims: &[usize],
    fields: &[(String, String)],
    data: &[f64],
) -> Result<()> {
    let expect: usize = dims.iter().product();
    if data.len() != expect {
        return Err(Error::Dimension(format!(
            "payload length {} does not match dims {:?}",
            data.len(),
            dims
        )));
    }
    let mut header = String::new();
    header.push_str(MAGIC);
    header.push('\n');
    header.push_str(&format!("kind={kind}\n"));
    let dims_s: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
    header.push_str(&format!("dims={}\n", dims_s.join(" ")));
    for (k, v) in fields {
        header.push_str(&format!("{k}={v}\n"));
    }
    header.push('\n');
    let mut bytes = header.into_bytes();
    bytes.reserve(data.len() * 4);
    for &v in data {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Reads any container back as header plus payload.
pub fn read(path: &Path) -> Result<(Header, Vec<f64>)> {
    let bytes = fs::read(path)?;
    let split = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| container_err(path, "missing blank line after header"))?;
    let text = std::str::from_utf8(&bytes[..split])
        .map_err(|_| container_err(path, "header is not UTF-8"))?;
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(container_err(path, format!("bad magic, expected `{MAGIC}`")));
    }
    let mut kind = None;
    let mut dims = None;
    let mut fields = Vec::new();
    for line in lines {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| container_err(path, format!("malformed header line `{line}`")))?;
        match k {
            "kind" => kind = Some(v.to_string()),
            "dims" => {
                let parsed: std::result::Result<Vec<usize>, _> =
                    v.split_whitespace().map(str::parse).collect();
                dims = Some(
                    parsed.map_err(|_| container_err(path, format!("bad dims `{v}`")))?,
                );
            }
            _ => fields.push((k.to_string(), v.to_string())),
        }
    }
    let kind = kind.ok_or_else(|| container_err(path, "missing `kind`"))?;
    let dims = dims.ok_or_else(|| container_err(path, "missing `dims`"))?;
    let expect: usize = dims.iter().product();
    let payload = &bytes[split + 2..];
    if payload.len() != expect * 4 {
        return Err(container_err(
            path,
            format!("payload is {} bytes, dims {:?} need {}", payload.len(), dims, expect * 4),
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok((Header { kind, dims, fields }, data))
}

fn scan_fields(cfg: &ScanConfig) -> Vec<(String, String)> {
    vec![
        ("l".into(), cfg.l.to_string()),
        ("h".into(), cfg.h.to_string()),
        ("lambda_m".into(), cfg.lambda_m.to_string()),
        ("n_source".into(), cfg.n_source.to_string()),
        ("j_detectors".into(), cfg.j_detectors.to_string()),
        ("pixel_pitch".into(), cfg.pixel_pitch.to_string()),
    ]
}

fn scan_from_header(header: &Header, path: &Path) -> Result<ScanConfig> {
    ScanConfig::new(
        header.parse_field("l", path)?,
        header.parse_field("h", path)?,
        header.parse_field("lambda_m", path)?,
        header.parse_field("n_source", path)?,
        header.parse_field("j_detectors", path)?,
        header.parse_field("pixel_pitch", path)?,
    )
}

/// Image container (`kind` tells reconstructions, truths and DBPs apart).
pub fn write_image(
    path: &Path,
    img: &ImageGrid,
    kind: &str,
    extra: &[(String, String)],
) -> Result<()> {
    let mut fields = vec![("pixel_size".into(), img.pixel_size.to_string())];
    fields.extend_from_slice(extra);
    write(path, kind, &[img.height, img.width], &fields, &img.data)
}

pub fn read_image(path: &Path) -> Result<(ImageGrid, Header)> {
    let (header, data) = read(path)?;
    if header.dims.len() != 2 {
        return Err(container_err(path, format!("image needs 2 dims, got {:?}", header.dims)));
    }
    let mut img = ImageGrid::zeros(
        header.dims[1],
        header.dims[0],
        header.parse_field("pixel_size", path)?,
    )?;
    img.data = data;
    Ok((img, header))
}

pub fn write_sinogram(path: &Path, sino: &Sinogram, extra: &[(String, String)]) -> Result<()> {
    let cfg = &sino.cfg;
    let mut fields = scan_fields(cfg);
    fields.extend_from_slice(extra);
    write(
        path,
        "sinogram",
        &[cfg.segments, cfg.n_source, cfg.j_detectors],
        &fields,
        &sino.data,
    )
}

pub fn read_sinogram(path: &Path) -> Result<(Sinogram, Header)> {
    let (header, data) = read(path)?;
    let cfg = scan_from_header(&header, path)?;
    if header.dims != [cfg.segments, cfg.n_source, cfg.j_detectors] {
        return Err(container_err(
            path,
            format!("sinogram dims {:?} disagree with scan geometry", header.dims),
        ));
    }
    let mut sino = Sinogram::zeros(&cfg);
    sino.data = data;
    Ok((sino, header))
}

pub fn write_weight_map(path: &Path, weights: &WeightMap, extra: &[(String, String)]) -> Result<()> {
    let cfg = &weights.cfg;
    let mut fields = scan_fields(cfg);
    fields.push(("phi".into(), weights.phi.to_string()));
    fields.extend_from_slice(extra);
    write(
        path,
        "weights",
        &[cfg.segments, cfg.n_source, cfg.j_detectors],
        &fields,
        &weights.data,
    )
}

pub fn read_weight_map(path: &Path) -> Result<(WeightMap, Header)> {
    let (header, data) = read(path)?;
    let cfg = scan_from_header(&header, path)?;
    if header.dims != [cfg.segments, cfg.n_source, cfg.j_detectors] {
        return Err(container_err(
            path,
            format!("weight map dims {:?} disagree with scan geometry", header.dims),
        ));
    }
    let phi = header.parse_field("phi", path)?;
    Ok((WeightMap { cfg, phi, data }, header))
}

/// 16-bit binary PGM quicklook with a linear display window `[lo, hi]`.
pub fn write_pgm(path: &Path, img: &ImageGrid, lo: f64, hi: f64) -> Result<()> {
    if !(hi > lo) {
        return Err(Error::Argument(format!("window must satisfy lo < hi, got {lo}:{hi}")));
    }
    let mut bytes = format!("P5\n{} {}\n65535\n", img.width, img.height).into_bytes();
    for &v in &img.data {
        let x = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        let q = (x * 65535.0).round() as u16;
        bytes.extend_from_slice(&q.to_be_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}
