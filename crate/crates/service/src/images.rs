use graphbench_core::digest::sha256_hex;
use graphbench_core::GraphBenchmark;
use std::collections::HashMap;
use std::path::{Path, PathBuf};

/// Content address to file.
#[derive(Debug, Default, Clone)]
pub struct ImageIndex {
    paths: HashMap<String, PathBuf>,
}

impl ImageIndex {
    pub fn from_graph(g: &GraphBenchmark, root: &Path) -> Self {
        let mut paths = HashMap::new();
        for n in g.nodes.values() {
            for s in &n.screens {
                paths.insert(s.sha256.clone(), root.join(&s.image));
            }
        }
        Self { paths }
    }

    /// Hashes every `.png` under `dir` (recursively) and registers it.
    pub fn scan_dir(&mut self, dir: &Path) -> std::io::Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                self.scan_dir(&path)?;
            } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
                let sha = sha256_hex(&std::fs::read(&path)?);
                self.paths.entry(sha).or_insert(path);
            }
        }
        Ok(())
    }

    pub fn path(&self, sha: &str) -> Option<&Path> {
        self.paths.get(sha).map(PathBuf::as_path)
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}
