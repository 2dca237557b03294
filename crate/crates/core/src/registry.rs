//! Named strategy registries.
//!
//! Interchangeable implementations (model providers, judges, sandboxes,
//! search adapters, ...) are registered under a name and built at runtime
//! from configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("unknown {kind} {name:?}; available: {}", available.join(", "))]
    UnknownName {
        kind: &'static str,
        name: String,
        available: Vec<String>,
    },
    #[error("failed to build {kind} {name:?}: {reason}")]
    Build {
        kind: &'static str,
        name: String,
        reason: String,
    },
}

type Factory<T, C> = Arc<dyn Fn(&C) -> Result<Arc<T>, String> + Send + Sync>;

pub struct Registry<T: ?Sized, C> {
    kind: &'static str,
    entries: BTreeMap<String, Factory<T, C>>,
}

impl<T: ?Sized, C> Clone for Registry<T, C> {
    fn clone(&self) -> Self {
        Self {
            kind: self.kind,
            entries: self.entries.clone(),
        }
    }
}

impl<T: ?Sized, C> fmt::Debug for Registry<T, C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("names", &self.names())
            .finish()
    }
}

impl<T: ?Sized, C> Registry<T, C> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Registers `factory` under `name`, replacing any previous entry.
    pub fn register<F>(&mut self, name: &str, factory: F) -> &mut Self
    where
        F: Fn(&C) -> Result<Arc<T>, String> + Send + Sync + 'static,
    {
        self.entries.insert(name.to_string(), Arc::new(factory));
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn build(&self, name: &str, config: &C) -> Result<Arc<T>, RegistryError> {
        let factory = self
            .entries
            .get(name)
            .ok_or_else(|| RegistryError::UnknownName {
                kind: self.kind,
                name: name.to_string(),
                available: self.names(),
            })?;
        factory(config).map_err(|reason| RegistryError::Build {
            kind: self.kind,
            name: name.to_string(),
            reason,
        })
    }
}
