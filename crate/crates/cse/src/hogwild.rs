//! Shared-state cell for lock-free parallel SGD.
//!
//! Worker threads intentionally read and write embedding rows without
//! synchronization; with sparse touches per step, lost or torn updates are
//! rare and tolerated. Values never originate from partially written memory
//! in a way the trainer cares about — every f32 bit pattern is a value, and
//! divergence is caught by the loss finiteness check.

use std::cell::UnsafeCell;
use std::sync::Arc;

/// Reference-counted cell handing out unsynchronized mutable access.
pub(crate) struct HogwildCell<T>(Arc<UnsafeCell<T>>);

unsafe impl<T: Send> Send for HogwildCell<T> {}
unsafe impl<T: Send> Sync for HogwildCell<T> {}

impl<T> Clone for HogwildCell<T> {
    fn clone(&self) -> Self {
        HogwildCell(Arc::clone(&self.0))
    }
}

impl<T> HogwildCell<T> {
    pub fn new(value: T) -> Self {
        HogwildCell(Arc::new(UnsafeCell::new(value)))
    }

    /// Mutable access without exclusion.
    ///
    /// # Safety
    /// Callers accept data races on the inner value: concurrent `as_mut`
    /// holders may clobber each other's writes. Only plain-old-data interior
    /// state (no invariant-carrying structures) may be mutated through this.
    #[allow(clippy::mut_from_ref)]
    pub unsafe fn as_mut(&self) -> &mut T {
        &mut *self.0.get()
    }

    /// Recovers the inner value once every clone has been dropped.
    pub fn into_inner(self) -> T {
        match Arc::try_unwrap(self.0) {
            Ok(cell) => cell.into_inner(),
            Err(_) => panic!("HogwildCell::into_inner with outstanding clones"),
        }
    }
}
