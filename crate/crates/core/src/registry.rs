//! Name-keyed registries of interchangeable strategies.
//!
//! Every family of swappable algorithms (functional depth measures,
//! cointegration tests) is exposed as a trait object. A [`Registry`] maps the
//! CLI / config name of each implementation to a shared instance so the
//! pipeline can pick one at runtime.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Anything that can live in a [`Registry`].
pub trait Named {
    fn name(&self) -> &'static str;
}

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Arc<T>>,
}

impl<T: ?Sized + Named> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Registers `item` under its own name, replacing any previous entry.
    pub fn register(&mut self, item: Arc<T>) -> &mut Self {
        self.entries.insert(item.name(), item);
        self
    }

    pub fn get(&self, name: &str) -> Result<Arc<T>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct A;
    impl Named for A {
        fn name(&self) -> &'static str {
            "a"
        }
    }

    #[test]
    fn lookup_and_unknown() {
        let mut reg: Registry<dyn Named> = Registry::new("thing");
        reg.register(Arc::new(A));
        assert_eq!(reg.get("a").unwrap().name(), "a");
        let err = reg.get("b").err().unwrap();
        assert!(err.to_string().contains("available: a"));
    }
}
