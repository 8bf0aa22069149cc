//! Run configuration: a flat key-value text file with `[sections]`,
//! trivially parseable and diffable. Unknown sections or keys are rejected.
//!
//! ```text
//! [domain]
//! kind = torus            # torus | sphere
//! nx = 64                 # torus resolution (even, >= 8)
//! ny = 64
//! lx = 1.0                # torus side lengths
//! ly = 1.0
//! # kind = sphere instead takes:
//! # subdivisions = 4      # icosphere subdivision level (<= 8)
//! # radius = 1.0
//!
//! [initial]
//! ansatz = sinusoid       # flat | sinusoid | bump | file
//! amplitude = 0.05        # sinusoid/bump
//! kx = 1                  # sinusoid wave numbers (zonal degree on the sphere)
//! ky = 0
//! # bump: center_x/center_y[/center_z], width, height
//! # file: path = nodes.bin   (little-endian f64 per node)
//!
//! [flow]
//! alpha_prime = 0.1
//! t_end = 1.0
//! dt_safety = 0.9
//! sample_stride = 50
//! residual_check_stride = 50
//! entropy_floor = 1e-8
//! dealias = false
//!
//! [output]
//! directory = out/run1
//! plots = true
//! seed = 42
//!
//! [sweep]                 # only used by the sweep command
//! alpha_primes = 0.05, 0.1, 0.2
//! amplitudes = 0.02, 0.05
//! ```

use crate::curvature::FlowParams;
use crate::error::{Error, Result};
use crate::surface::SurfaceDomain;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Torus { nx: usize, ny: usize, lx: f64, ly: f64 },
    Sphere { subdivisions: u32, radius: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "ansatz", rename_all = "snake_case")]
pub enum InitialSpec {
    Flat,
    Sinusoid { amplitude: f64, kx: u32, ky: u32 },
    Bump { center: [f64; 3], width: f64, height: f64 },
    File { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub alpha_primes: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub initial: InitialSpec,
    pub flow: FlowParams,
    pub dealias: bool,
    pub out_dir: Option<PathBuf>,
    pub plots: bool,
    pub seed: u64,
    pub sweep: Option<SweepSpec>,
}

fn parse_num<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::Config(format!("[{section}] {key}: cannot parse '{value}'")))
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!(
            "[{section}] {key}: expected true/false, got '{value}'"
        ))),
    }
}

type Sections = BTreeMap<String, BTreeMap<String, String>>;

fn split_sections(text: &str) -> Result<Sections> {
    let mut sections: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            if sections.contains_key(&name) {
                return Err(Error::Config(format!("duplicate section [{name}]")));
            }
            sections.insert(name.clone(), BTreeMap::new());
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected 'key = value', got '{line}'",
                lineno + 1
            )));
        };
        let section = current
            .as_ref()
            .ok_or_else(|| Error::Config(format!("line {}: key outside any section", lineno + 1)))?;
        let prev = sections
            .get_mut(section)
            .unwrap()
            .insert(key.trim().to_string(), value.trim().to_string());
        if prev.is_some() {
            return Err(Error::Config(format!(
                "[{section}] duplicate key '{}'",
                key.trim()
            )));
        }
    }
    Ok(sections)
}

/// Take a key out of a section map; remaining keys are reported as unknown.
fn take(map: &mut BTreeMap<String, String>, key: &str) -> Option<String> {
    map.remove(key)
}

fn require(section: &str, map: &mut BTreeMap<String, String>, key: &str) -> Result<String> {
    take(map, key).ok_or_else(|| Error::Config(format!("[{section}] missing key '{key}'")))
}

fn reject_unknown(section: &str, map: &BTreeMap<String, String>) -> Result<()> {
    if let Some(key) = map.keys().next() {
        return Err(Error::Config(format!("[{section}] unknown key '{key}'")));
    }
    Ok(())
}

impl RunConfig {
    pub fn parse_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<RunConfig> {
        let mut sections = split_sections(text)?;

        let mut dom = sections
            .remove("domain")
            .ok_or_else(|| Error::Config("missing [domain] section".into()))?;
        let kind = require("domain", &mut dom, "kind")?;
        let domain = match kind.as_str() {
            "torus" => {
                let nx = parse_num("domain", "nx", &require("domain", &mut dom, "nx")?)?;
                let ny = parse_num("domain", "ny", &require("domain", &mut dom, "ny")?)?;
                let lx = parse_num("domain", "lx", &require("domain", &mut dom, "lx")?)?;
                let ly = parse_num("domain", "ly", &require("domain", &mut dom, "ly")?)?;
                if lx <= 0.0 || ly <= 0.0 {
                    return Err(Error::Config("[domain] side lengths must be positive".into()));
                }
                DomainSpec::Torus { nx, ny, lx, ly }
            }
            "sphere" => {
                let subdivisions =
                    parse_num("domain", "subdivisions", &require("domain", &mut dom, "subdivisions")?)?;
                let radius = parse_num("domain", "radius", &require("domain", &mut dom, "radius")?)?;
                if radius <= 0.0 {
                    return Err(Error::Config("[domain] radius must be positive".into()));
                }
                DomainSpec::Sphere { subdivisions, radius }
            }
            other => {
                return Err(Error::Config(format!(
                    "[domain] kind must be torus or sphere, got '{other}'"
                )))
            }
        };
        reject_unknown("domain", &dom)?;

        let mut init = sections
            .remove("initial")
            .ok_or_else(|| Error::Config("missing [initial] section".into()))?;
        let ansatz = require("initial", &mut init, "ansatz")?;
        let initial = match ansatz.as_str() {
            "flat" => InitialSpec::Flat,
            "sinusoid" => InitialSpec::Sinusoid {
                amplitude: parse_num("initial", "amplitude", &require("initial", &mut init, "amplitude")?)?,
                kx: parse_num("initial", "kx", &require("initial", &mut init, "kx")?)?,
                ky: match take(&mut init, "ky") {
                    Some(v) => parse_num("initial", "ky", &v)?,
                    None => 0,
                },
            },
            "bump" => {
                let cx = parse_num("initial", "center_x", &require("initial", &mut init, "center_x")?)?;
                let cy = parse_num("initial", "center_y", &require("initial", &mut init, "center_y")?)?;
                let cz = match take(&mut init, "center_z") {
                    Some(v) => parse_num("initial", "center_z", &v)?,
                    None => 0.0,
                };
                InitialSpec::Bump {
                    center: [cx, cy, cz],
                    width: parse_num("initial", "width", &require("initial", &mut init, "width")?)?,
                    height: parse_num("initial", "height", &require("initial", &mut init, "height")?)?,
                }
            }
            "file" => InitialSpec::File {
                path: PathBuf::from(require("initial", &mut init, "path")?),
            },
            other => {
                return Err(Error::Config(format!(
                    "[initial] ansatz must be flat|sinusoid|bump|file, got '{other}'"
                )))
            }
        };
        reject_unknown("initial", &init)?;

        let defaults = FlowParams::default();
        let mut flow_map = sections.remove("flow").unwrap_or_default();
        let mut flow = FlowParams {
            alpha_prime: match take(&mut flow_map, "alpha_prime") {
                Some(v) => parse_num("flow", "alpha_prime", &v)?,
                None => return Err(Error::Config("[flow] missing key 'alpha_prime'".into())),
            },
            ..defaults
        };
        if let Some(v) = take(&mut flow_map, "t_end") {
            flow.t_end = parse_num("flow", "t_end", &v)?;
        }
        if let Some(v) = take(&mut flow_map, "dt_safety") {
            flow.dt_safety = parse_num("flow", "dt_safety", &v)?;
        }
        if let Some(v) = take(&mut flow_map, "sample_stride") {
            flow.sample_stride = parse_num("flow", "sample_stride", &v)?;
        }
        if let Some(v) = take(&mut flow_map, "residual_check_stride") {
            flow.residual_check_stride = parse_num("flow", "residual_check_stride", &v)?;
        }
        if let Some(v) = take(&mut flow_map, "entropy_floor") {
            flow.entropy_floor = parse_num("flow", "entropy_floor", &v)?;
        }
        let dealias = match take(&mut flow_map, "dealias") {
            Some(v) => parse_bool("flow", "dealias", &v)?,
            None => false,
        };
        reject_unknown("flow", &flow_map)?;
        flow.validate()?;

        let mut out = sections.remove("output").unwrap_or_default();
        let out_dir = take(&mut out, "directory").map(PathBuf::from);
        let plots = match take(&mut out, "plots") {
            Some(v) => parse_bool("output", "plots", &v)?,
            None => false,
        };
        let seed = match take(&mut out, "seed") {
            Some(v) => parse_num("output", "seed", &v)?,
            None => 42,
        };
        reject_unknown("output", &out)?;

        let sweep = match sections.remove("sweep") {
            Some(mut sw) => {
                let parse_list = |section: &str, key: &str, v: &str| -> Result<Vec<f64>> {
                    v.split(',')
                        .map(|s| parse_num::<f64>(section, key, s.trim()))
                        .collect()
                };
                let alpha_primes =
                    parse_list("sweep", "alpha_primes", &require("sweep", &mut sw, "alpha_primes")?)?;
                let amplitudes =
                    parse_list("sweep", "amplitudes", &require("sweep", &mut sw, "amplitudes")?)?;
                reject_unknown("sweep", &sw)?;
                if alpha_primes.is_empty() || amplitudes.is_empty() {
                    return Err(Error::Config("[sweep] lists must be non-empty".into()));
                }
                if alpha_primes.iter().any(|&a| a < 0.0) {
                    return Err(Error::Config("[sweep] alpha_primes must be >= 0".into()));
                }
                Some(SweepSpec {
                    alpha_primes,
                    amplitudes,
                })
            }
            None => None,
        };

        if let Some(section) = sections.keys().next() {
            return Err(Error::Config(format!("unknown section [{section}]")));
        }

        Ok(RunConfig {
            domain,
            initial,
            flow,
            dealias,
            out_dir,
            plots,
            seed,
            sweep,
        })
    }

    pub fn build_domain(&self) -> Result<SurfaceDomain> {
        let domain = match self.domain {
            DomainSpec::Torus { nx, ny, lx, ly } => SurfaceDomain::build_torus(nx, ny, lx, ly)?,
            DomainSpec::Sphere { subdivisions, radius } => {
                SurfaceDomain::build_sphere(subdivisions, radius)?
            }
        };
        Ok(domain.with_dealiasing(self.dealias))
    }

    /// Evaluate the initial conformal factor on the domain nodes.
    pub fn initial_field(&self, domain: &SurfaceDomain) -> Result<Vec<f64>> {
        match &self.initial {
            InitialSpec::Flat => Ok(vec![0.0; domain.node_count()]),
            InitialSpec::Sinusoid { amplitude, kx, ky } => {
                Ok(sinusoid_field(domain, *amplitude, *kx, *ky))
            }
            InitialSpec::Bump { center, width, height } => {
                if *width <= 0.0 {
                    return Err(Error::Config("[initial] bump width must be positive".into()));
                }
                Ok(bump_field(domain, *center, *width, *height))
            }
            InitialSpec::File { path } => read_field_file(path, domain.node_count()),
        }
    }
}

fn sinusoid_field(domain: &SurfaceDomain, amplitude: f64, kx: u32, ky: u32) -> Vec<f64> {
    match domain.kind() {
        crate::surface::SurfaceKind::FlatTorus => {
            // u = A sin(2 pi (kx x / lx + ky y / ly)); grid shape and side
            // lengths recovered from the node layout.
            let positions = domain.positions();
            let nx = positions.iter().take_while(|p| p[1] == 0.0).count();
            let hx = positions[1][0] - positions[0][0];
            let lx = hx * nx as f64;
            let hy = positions[nx][1];
            let ny = positions.len() / nx;
            let ly = hy * ny as f64;
            positions
                .iter()
                .map(|p| {
                    amplitude
                        * (2.0 * std::f64::consts::PI * (kx as f64 * p[0] / lx + ky as f64 * p[1] / ly))
                            .sin()
                })
                .collect()
        }
        crate::surface::SurfaceKind::RoundSphere => {
            // Zonal harmonic of degree kx: A * P_kx(z / rho).
            let degree = kx.max(1) as usize;
            domain
                .positions()
                .iter()
                .map(|p| {
                    let norm = p.iter().map(|c| c * c).sum::<f64>().sqrt();
                    amplitude * legendre(degree, p[2] / norm)
                })
                .collect()
        }
    }
}

fn legendre(degree: usize, x: f64) -> f64 {
    let mut p0 = 1.0;
    let mut p1 = x;
    if degree == 0 {
        return p0;
    }
    for l in 1..degree {
        let p2 = ((2 * l + 1) as f64 * x * p1 - l as f64 * p0) / (l + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

fn bump_field(domain: &SurfaceDomain, center: [f64; 3], width: f64, height: f64) -> Vec<f64> {
    match domain.kind() {
        crate::surface::SurfaceKind::FlatTorus => {
            let positions = domain.positions();
            let nx = positions.iter().take_while(|p| p[1] == 0.0).count();
            let hx = positions[1][0] - positions[0][0];
            let lx = hx * nx as f64;
            let hy = positions[nx][1];
            let ny = positions.len() / nx;
            let ly = hy * ny as f64;
            positions
                .iter()
                .map(|p| {
                    let dx = periodic_distance(p[0] - center[0], lx);
                    let dy = periodic_distance(p[1] - center[1], ly);
                    height * (-(dx * dx + dy * dy) / (2.0 * width * width)).exp()
                })
                .collect()
        }
        crate::surface::SurfaceKind::RoundSphere => {
            let norm_c = center.iter().map(|c| c * c).sum::<f64>().sqrt();
            domain
                .positions()
                .iter()
                .map(|p| {
                    let norm_p = p.iter().map(|c| c * c).sum::<f64>().sqrt();
                    let mut d_sq = 0.0;
                    for i in 0..3 {
                        let diff = p[i] / norm_p - center[i] / norm_c;
                        d_sq += diff * diff;
                    }
                    height * (-d_sq / (2.0 * width * width)).exp()
                })
                .collect()
        }
    }
}

fn periodic_distance(raw: f64, period: f64) -> f64 {
    let d = raw.rem_euclid(period);
    d.min(period - d)
}

/// Node field file: exactly `node_count` little-endian f64 values, the same
/// payload format as trajectory snapshots.
pub fn read_field_file(path: &Path, node_count: usize) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() != node_count * 8 {
        return Err(Error::Config(format!(
            "field file {}: expected {} bytes ({} nodes), found {}",
            path.display(),
            node_count * 8,
            node_count,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
