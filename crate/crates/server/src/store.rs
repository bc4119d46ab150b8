//! Content-addressed program store, optionally mirrored to a directory of
//! canonical documents named `<id>.json`.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use dpp_core::{parse_program, program_id, serialize_program, Program};

#[derive(Debug)]
pub struct StoredProgram {
    pub id: String,
    pub program: Program,
    /// Canonical document bytes.
    pub bytes: Vec<u8>,
}

#[derive(Debug, Default)]
pub struct Store {
    dir: Option<PathBuf>,
    programs: RwLock<BTreeMap<String, Arc<StoredProgram>>>,
}

impl Store {
    pub fn in_memory() -> Store {
        Store::default()
    }

    /// Opens (creating if needed) a store directory and loads every document
    /// whose file name matches its recomputed id. Other files are skipped.
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Store> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut programs = BTreeMap::new();
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let Ok(program) = fs::read(&path).map_err(|e| e.to_string()).and_then(|b| parse_program(&b).map_err(|e| e.to_string())) else {
                eprintln!("store: skipping unreadable {}", path.display());
                continue;
            };
            let id = program_id(&program);
            if id != stem {
                eprintln!("store: skipping {} (content hashes to {id})", path.display());
                continue;
            }
            let bytes = serialize_program(&program);
            programs.insert(id.clone(), Arc::new(StoredProgram { id, program, bytes }));
        }
        Ok(Store { dir: Some(dir), programs: RwLock::new(programs) })
    }

    pub fn len(&self) -> usize {
        self.programs.read().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, id: &str) -> Option<Arc<StoredProgram>> {
        self.programs.read().expect("store lock").get(id).cloned()
    }

    /// Stores `program`, writing it to disk first when the store is backed
    /// by a directory. Returns the entry and whether it was new.
    pub fn insert(&self, program: Program) -> io::Result<(Arc<StoredProgram>, bool)> {
        let bytes = serialize_program(&program);
        let id = program_id(&program);
        let mut programs = self.programs.write().expect("store lock");
        if let Some(existing) = programs.get(&id) {
            return Ok((existing.clone(), false));
        }
        if let Some(dir) = &self.dir {
            write_atomic(dir, &id, &bytes)?;
        }
        let entry = Arc::new(StoredProgram { id: id.clone(), program, bytes });
        programs.insert(id, entry.clone());
        Ok((entry, true))
    }
}

fn write_atomic(dir: &Path, id: &str, bytes: &[u8]) -> io::Result<()> {
    let tmp = dir.join(format!(".{id}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::File::open(&tmp)?.sync_all()?;
    fs::rename(&tmp, dir.join(format!("{id}.json")))
}
