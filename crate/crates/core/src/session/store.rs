//! File store: one directory per project holding `project.json` and the
//! dataset as `data-<sha256>.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{DatasetRef, Project};
use crate::data::Dataset;
use crate::error::{Error, Result};

pub const PROJECT_FILE: &str = "project.json";

pub fn dataset_hash(data: &Dataset) -> Result<String> {
    let text = data.to_csv_string()?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone)]
pub struct ProjectStore {
    root: PathBuf,
}

impl ProjectStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, id: &str) -> Result<PathBuf> {
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(Error::InvalidParameter(format!("invalid project id {id:?}")));
        }
        Ok(self.root.join(id))
    }

    pub fn exists(&self, id: &str) -> bool {
        self.dir(id).is_ok_and(|d| d.join(PROJECT_FILE).is_file())
    }

    pub fn save(&self, project: &Project) -> Result<()> {
        let dir = self.dir(&project.id)?;
        fs::create_dir_all(&dir)?;
        let tmp = dir.join(format!("{PROJECT_FILE}.tmp"));
        fs::write(&tmp, project.to_json()?)?;
        fs::rename(tmp, dir.join(PROJECT_FILE))?;
        Ok(())
    }

    pub fn load(&self, id: &str) -> Result<Project> {
        let text = fs::read_to_string(self.dir(id)?.join(PROJECT_FILE))?;
        Project::from_json(&text)
    }

    pub fn save_dataset(&self, id: &str, data: &Dataset) -> Result<DatasetRef> {
        let dir = self.dir(id)?;
        fs::create_dir_all(&dir)?;
        let r = DatasetRef::of(data)?;
        let path = dir.join(r.file_name());
        if !path.exists() {
            data.save_csv(path)?;
        }
        Ok(r)
    }

    pub fn load_dataset(&self, id: &str, r: &DatasetRef) -> Result<Dataset> {
        let data = Dataset::load_csv(self.dir(id)?.join(r.file_name()), None)?;
        if dataset_hash(&data)? != r.sha256 {
            return Err(Error::InvalidParameter(format!("dataset for project {id} fails its hash check")));
        }
        Ok(data)
    }

    /// Ids of every stored project, sorted.
    pub fn list(&self) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if entry.path().join(PROJECT_FILE).is_file() {
                if let Some(name) = entry.file_name().to_str() {
                    ids.push(name.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::Settings;
    use crate::toy::{generate_toy_dataset, toy_first_iteration_graph};

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let store = ProjectStore::open(dir.path()).unwrap();
        let data = generate_toy_dataset(250, 9).unwrap();
        let settings = Settings { reps: 30, ..Settings::default() };
        let mut p = Project::new("toy-1", &data, settings).unwrap();
        let r = store.save_dataset("toy-1", &data).unwrap();
        assert_eq!(r, p.dataset_ref);
        p.set_graph(toy_first_iteration_graph()).unwrap();
        p.run_iteration(&data, "one").unwrap();
        store.save(&p).unwrap();
        let back = store.load("toy-1").unwrap();
        assert_eq!(back.to_json().unwrap(), p.to_json().unwrap());
        assert_eq!(store.load_dataset("toy-1", &back.dataset_ref).unwrap(), data);
        assert_eq!(store.list().unwrap(), vec!["toy-1".to_string()]);
        assert!(store.load("../etc").is_err());
    }
}
