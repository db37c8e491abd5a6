//! Name-keyed collections of interchangeable strategies.
//!
//! Solvers, fill orderings, inner products and problem builders each sit
//! behind their own trait; a `Registry` holds boxed implementations and hands
//! one out by the name used in config files.

use crate::error::{Error, Result};

pub trait Named {
    fn name(&self) -> &'static str;
}

pub struct Registry<T: ?Sized + Named> {
    kind: &'static str,
    entries: Vec<Box<T>>,
}

impl<T: ?Sized + Named> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: Vec::new(),
        }
    }

    /// Adds a strategy. A later registration under an existing name replaces
    /// the earlier one.
    pub fn register(&mut self, item: Box<T>) {
        if let Some(slot) = self.entries.iter_mut().find(|e| e.name() == item.name()) {
            *slot = item;
        } else {
            self.entries.push(item);
        }
    }

    pub fn get(&self, name: &str) -> Result<&T> {
        self.entries
            .iter()
            .find(|e| e.name() == name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }
}
