//! On-disk cache of base (`ε = 1`) eigensystems, one JSON record per key.

use std::fs;
use std::path::{Path, PathBuf};

use cutlab::spectrum::{solve_eigensystem, EigenSystem, EigenSystemRecord, Grid, SOLVER_VERSION};
use cutlab::Potential;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheOutcome {
    Disabled,
    Hit,
    Miss,
    /// The stored record came from another solver version.
    Stale,
    /// The stored file could not be read back; it was recomputed and overwritten.
    Corrupt,
}

pub struct EigenCache {
    dir: Option<PathBuf>,
}

/// `(γ, L, n_points, n_modes)` with reals rounded to 12 significant digits.
pub fn cache_key(gamma: f64, half_width: f64, n_points: usize, n_modes: usize) -> String {
    format!("eigen_g{gamma:.11e}_L{half_width:.11e}_p{n_points}_m{n_modes}")
}

impl EigenCache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    /// Returns the cached eigensystem iff the key and solver version match, solving and storing
    /// it otherwise.
    pub fn solve(&self, p: &Potential, grid: &Grid, n_modes: usize) -> Result<(EigenSystem, CacheOutcome), CliError> {
        let key = cache_key(p.gamma(), grid.half_width(), grid.n_points(), n_modes);
        let Some(path) = self.path(&key) else {
            return Ok((solve_eigensystem(p, grid, n_modes)?, CacheOutcome::Disabled));
        };
        let outcome = match load(&path) {
            Loaded::Absent => CacheOutcome::Miss,
            Loaded::Record(record) if record.solver_version != SOLVER_VERSION => CacheOutcome::Stale,
            Loaded::Record(record) => {
                let same_key = cache_key(record.gamma, record.half_width, record.n_points, record.n_modes) == key;
                match EigenSystem::from_record(*record) {
                    Ok(es) if same_key => {
                        eprintln!("cache hit: {}", path.display());
                        return Ok((es, CacheOutcome::Hit));
                    }
                    Ok(_) => CacheOutcome::Miss,
                    Err(e) => {
                        eprintln!("warning: cache file {} is inconsistent ({e}); recomputing", path.display());
                        CacheOutcome::Corrupt
                    }
                }
            }
            Loaded::Corrupt(reason) => {
                eprintln!("warning: cache file {} is corrupt ({reason}); recomputing", path.display());
                CacheOutcome::Corrupt
            }
        };
        if outcome == CacheOutcome::Stale {
            eprintln!("cache miss: {} was written by another solver version", path.display());
        } else if outcome == CacheOutcome::Miss {
            eprintln!("cache miss: {}", path.display());
        }
        let es = solve_eigensystem(p, grid, n_modes)?;
        store(&path, &es.to_record())?;
        Ok((es, outcome))
    }
}

enum Loaded {
    Absent,
    Record(Box<EigenSystemRecord>),
    Corrupt(String),
}

fn load(path: &Path) -> Loaded {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Loaded::Absent,
        Err(e) => return Loaded::Corrupt(e.to_string()),
    };
    match serde_json::from_slice::<EigenSystemRecord>(&bytes) {
        Ok(r) => Loaded::Record(Box::new(r)),
        Err(e) => Loaded::Corrupt(e.to_string()),
    }
}

/// Writes through a temporary file so that readers never see a partial record.
fn store(path: &Path, record: &EigenSystemRecord) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!("json.tmp{}", std::process::id()));
    let text = serde_json::to_vec(record).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
