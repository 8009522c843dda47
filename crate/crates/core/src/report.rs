//! Output writers: JSON reports, CSV trajectories and sweep tables, and a
//! run manifest with content digests. Timestamps live only in the
//! manifest so every other artifact is byte-reproducible.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::sim::{SimReport, SweepReport};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestFile {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub files: Vec<ManifestFile>,
}

/// Collects written artifacts and finalizes them into `manifest.json`.
pub struct OutputWriter {
    dir: PathBuf,
    files: Vec<ManifestFile>,
    started_unix_ms: u128,
}

fn now_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

impl OutputWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new(), started_unix_ms: now_ms() })
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.files.push(ManifestFile {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes `trajectories.csv`: iter, msd_net, msd_1..msd_N, gap.
    pub fn write_trajectories(&mut self, name: &str, sim: &SimReport) -> Result<PathBuf> {
        let n = sim.msd_k_traj.len();
        let mut out = String::from("iter,msd_net");
        for k in 0..n {
            out.push_str(&format!(",msd_{}", k + 1));
        }
        out.push_str(",gap\n");
        for (t, &it) in sim.iters.iter().enumerate() {
            out.push_str(&format!("{it},{:.12e}", sim.msd_net_traj[t]));
            for k in 0..n {
                out.push_str(&format!(",{:.12e}", sim.msd_k_traj[k][t]));
            }
            match &sim.gap_traj {
                Some(g) => out.push_str(&format!(",{:.12e}\n", g[t])),
                None => out.push_str(",\n"),
            }
        }
        self.write_bytes(name, out.as_bytes())
    }

    /// Writes `sweep.csv`: factor, nu, msd_net, disagreement, gap, rho_Fcal.
    pub fn write_sweep_csv(&mut self, name: &str, sweep: &SweepReport) -> Result<PathBuf> {
        let mut out = String::from("factor,nu,msd_net,disagreement,gap,rho_fcal\n");
        for p in &sweep.points {
            out.push_str(&format!(
                "{:.6e},{:.6e},{:.12e},{:.12e},{},{:.12e}\n",
                p.factor,
                p.nu,
                p.msd_net,
                p.max_disagreement,
                p.steady_gap.map(|g| format!("{g:.12e}")).unwrap_or_default(),
                p.rho_fcal
            ));
        }
        self.write_bytes(name, out.as_bytes())
    }

    pub fn finalize(mut self, config_sha256: &str, master_seed: u64) -> Result<RunManifest> {
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: config_sha256.to_string(),
            master_seed,
            started_unix_ms: self.started_unix_ms,
            finished_unix_ms: now_ms(),
            files: std::mem::take(&mut self.files),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn writer_produces_manifest_with_digests() {
        let dir = std::env::temp_dir().join(format!("report-test-{}", std::process::id()));
        let mut w = OutputWriter::new(&dir).unwrap();
        w.write_bytes("a.txt", b"hello").unwrap();
        w.write_json("b.json", &serde_json::json!({"x": 1})).unwrap();
        let manifest = w.finalize("deadbeef", 7).unwrap();
        assert_eq!(manifest.files.len(), 2);
        assert_eq!(manifest.files[0].sha256, sha256_hex(b"hello"));
        assert!(dir.join("manifest.json").exists());
        fs::remove_dir_all(&dir).unwrap();
    }
}
