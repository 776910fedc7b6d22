use crate::error::Result;
use crate::geometry::Geometry;
use crate::mesh::{self, read_mesh, refine_uniform, write_mesh, MeshOptions, TriMesh};
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

pub const CACHE_ENV: &str = "NECKFLOW_CACHE";

/// 64-bit FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn cache_key(g: &Geometry, opts: &MeshOptions, refinements: usize) -> String {
    let desc = format!(
        "{}|{:?}|{:?}|{:?}|{}|{:016x}|{}|{}|{}|{}",
        g.label,
        g.outer,
        g.inclusions,
        g.gap,
        g.chart_radius,
        g.eps.to_bits(),
        opts.target_h,
        opts.neck_layers,
        opts.min_angle_deg,
        refinements
    );
    format!("mesh_{:016x}.txt", fnv1a(desc.as_bytes()))
}

/// Generates (and uniformly refines) a mesh, reusing a cached copy from the
/// directory named by `NECKFLOW_CACHE` when one exists.
pub fn cached_mesh(g: &Geometry, opts: &MeshOptions, refinements: usize) -> Result<TriMesh> {
    let dir = std::env::var_os(CACHE_ENV).map(PathBuf::from);
    let path = dir.as_ref().map(|d| d.join(cache_key(g, opts, refinements)));
    if let Some(p) = &path {
        if let Ok(f) = std::fs::File::open(p) {
            match read_mesh(BufReader::new(f)) {
                Ok(mut m) => {
                    m.update_grading(Some(g));
                    log::debug!("mesh cache hit {}", p.display());
                    return Ok(m);
                }
                Err(e) => log::warn!("ignoring unreadable cached mesh {}: {e}", p.display()),
            }
        }
    }
    let mut m = mesh::generate_with(g, opts)?;
    for _ in 0..refinements {
        m = refine_uniform(&m);
    }
    if let (Some(d), Some(p)) = (&dir, &path) {
        std::fs::create_dir_all(d)?;
        let tmp = p.with_extension(format!("tmp{}", std::process::id()));
        write_mesh(&m, BufWriter::new(std::fs::File::create(&tmp)?))?;
        std::fs::rename(&tmp, p)?;
    }
    Ok(m)
}
