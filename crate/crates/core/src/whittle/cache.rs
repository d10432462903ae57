use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::index::{IndexTable, WhittleError};
use crate::arm_model::{TransitionKernel, Window};
use crate::scalar::Scalar;

/// Structure that determines an arm's index table: kernel, encoding and discount.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IndexKey {
    kernel: [u64; 4],
    window: Option<(usize, usize)>,
    allowance: u32,
    sleep: usize,
    gamma: u64,
}

impl IndexKey {
    pub fn new<T: Scalar>(
        kernel: &TransitionKernel<T>,
        window: Option<Window>,
        allowance: u32,
        sleep: usize,
        gamma: T,
    ) -> Self {
        let e = kernel.entries();
        let bits = |v: T| v.to_f64_lossy().to_bits();
        Self {
            kernel: [bits(e[0][0]), bits(e[0][1]), bits(e[1][0]), bits(e[1][1])],
            window: window.map(|w| (w.start, w.len)),
            allowance,
            sleep,
            gamma: bits(gamma),
        }
    }
}

/// Thread-safe memo of index tables. Computation happens outside the lock;
/// if two threads race on one key the first insert wins and both get it.
#[derive(Debug, Default)]
pub struct IndexCache<T = f64> {
    tables: Mutex<HashMap<IndexKey, Arc<IndexTable<T>>>>,
}

impl<T: Scalar> IndexCache<T> {
    pub fn new() -> Self {
        Self { tables: Mutex::new(HashMap::new()) }
    }

    pub fn get(&self, key: &IndexKey) -> Option<Arc<IndexTable<T>>> {
        self.tables.lock().expect("index cache poisoned").get(key).cloned()
    }

    pub fn get_or_compute<F>(&self, key: IndexKey, compute: F) -> Result<Arc<IndexTable<T>>, WhittleError>
    where
        F: FnOnce() -> Result<IndexTable<T>, WhittleError>,
    {
        if let Some(t) = self.get(&key) {
            return Ok(t);
        }
        let table = Arc::new(compute()?);
        let mut map = self.tables.lock().expect("index cache poisoned");
        Ok(map.entry(key).or_insert(table).clone())
    }

    pub fn len(&self) -> usize {
        self.tables.lock().expect("index cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rayon::prelude::*;

    #[test]
    fn computes_once_per_key() {
        let cache = IndexCache::<f64>::new();
        let k = TransitionKernel::<f64>::from_fail_probs(0.9, 0.1).unwrap();
        let key = IndexKey::new(&k, Some(Window::new(3, 2)), 1, 0, 0.95);
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let make = || {
            calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            Ok(IndexTable { values: vec![1.0], gamma: 0.95, tolerance: 1e-6 })
        };
        let a = cache.get_or_compute(key, make).unwrap();
        let b = cache.get_or_compute(key, make).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(calls.load(std::sync::atomic::Ordering::SeqCst), 1);
        let other = IndexKey::new(&k, None, 1, 0, 0.95);
        assert_ne!(key, other);
    }

    #[test]
    fn concurrent_inserts_agree() {
        let cache = IndexCache::<f64>::new();
        let k = TransitionKernel::<f64>::from_fail_probs(0.8, 0.2).unwrap();
        let key = IndexKey::new(&k, None, 1, 0, 0.95);
        let got: Vec<_> = (0..16)
            .into_par_iter()
            .map(|i| {
                cache
                    .get_or_compute(key, || Ok(IndexTable { values: vec![i as f64], gamma: 0.95, tolerance: 1e-6 }))
                    .unwrap()
            })
            .collect();
        let first = cache.get(&key).unwrap();
        assert!(got.iter().all(|t| t.values == first.values));
        assert_eq!(cache.len(), 1);
    }
}
