//! Project cache over the file store. Writes to one project are serialised
//! by a per-project async mutex; readers clone an `Arc` of the latest state
//! and never wait for a running iteration.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use codesign_core::data::Dataset;
use codesign_core::session::{Project, ProjectStore};

use crate::error::ApiError;

pub struct Loaded {
    pub project: Project,
    pub data: Arc<Dataset>,
}

struct Handle {
    writer: tokio::sync::Mutex<()>,
    current: RwLock<Arc<Loaded>>,
}

impl Handle {
    fn new(loaded: Loaded) -> Arc<Self> {
        Arc::new(Self {
            writer: tokio::sync::Mutex::new(()),
            current: RwLock::new(Arc::new(loaded)),
        })
    }

    fn read(&self) -> Arc<Loaded> {
        self.current.read().expect("project lock poisoned").clone()
    }
}

#[derive(Clone)]
pub struct AppState {
    store: ProjectStore,
    handles: Arc<Mutex<HashMap<String, Arc<Handle>>>>,
}

impl AppState {
    pub fn new(store: ProjectStore) -> Self {
        Self {
            store,
            handles: Arc::default(),
        }
    }

    pub fn store(&self) -> &ProjectStore {
        &self.store
    }

    fn handle(&self, id: &str) -> Result<Arc<Handle>, ApiError> {
        let mut handles = self.handles.lock().expect("handle map poisoned");
        if let Some(h) = handles.get(id) {
            return Ok(h.clone());
        }
        if !self.store.exists(id) {
            return Err(ApiError::not_found(format!("unknown project `{id}`")));
        }
        let project = self.store.load(id)?;
        let data = self.store.load_dataset(id, &project.dataset_ref)?;
        let h = Handle::new(Loaded {
            project,
            data: Arc::new(data),
        });
        handles.insert(id.to_string(), h.clone());
        Ok(h)
    }

    /// Persists a new project and caches it.
    pub fn insert(&self, project: Project, data: Dataset) -> Result<(), ApiError> {
        self.store.save_dataset(&project.id, &data)?;
        self.store.save(&project)?;
        let id = project.id.clone();
        let h = Handle::new(Loaded {
            project,
            data: Arc::new(data),
        });
        self.handles.lock().expect("handle map poisoned").insert(id, h);
        Ok(())
    }

    pub fn read(&self, id: &str) -> Result<Arc<Loaded>, ApiError> {
        Ok(self.handle(id)?.read())
    }

    /// Applies `f` to a copy of the project on a blocking thread, saves the
    /// result and publishes it. Readers see either the old or the new state.
    pub async fn update<F, R>(&self, id: &str, f: F) -> Result<R, ApiError>
    where
        F: FnOnce(&mut Project, &Dataset) -> codesign_core::Result<R> + Send + 'static,
        R: Send + 'static,
    {
        let h = self.handle(id)?;
        let _writer = h.writer.lock().await;
        let current = h.read();
        let store = self.store.clone();
        let (project, out) = tokio::task::spawn_blocking(move || {
            let mut project = current.project.clone();
            let out = f(&mut project, &current.data)?;
            store.save(&project)?;
            Ok::<_, codesign_core::Error>((project, out))
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
        let data = h.read().data.clone();
        *h.current.write().expect("project lock poisoned") = Arc::new(Loaded { project, data });
        Ok(out)
    }
}
