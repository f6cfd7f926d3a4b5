//! Instrumented allocation tracking for the buffers that dominate a run:
//! dense tensors and matrices, in-RAM coordinate data, slice matrices and
//! external-sort run buffers.
//!
//! Counters are per thread. A decomposition runs single-threaded, so the
//! high-water mark observed inside a [`measure`] scope is the run's peak.
//! Book-keeping is relative to the scope entry point: a scope that allocates
//! nothing reports zero even if buffers already existed when it was entered.
//!
//! ```
//! use ooctucker::mem::{self, MemClass, TrackedBuf};
//!
//! let (_, report) = mem::measure(|| {
//!     let buf: TrackedBuf<f64> = TrackedBuf::zeroed(MemClass::Dense, 1000);
//!     buf.len()
//! });
//! assert!(report.peak_total_bytes >= 8000);
//!
//! let (_, empty) = mem::measure(|| ());
//! assert_eq!(empty.peak_total_bytes, 0);
//! ```

use std::cell::RefCell;
use std::ops::{Deref, DerefMut};

/// Allocation classes, mirroring the RAM columns reported per run: everything
/// except [`MemClass::SortRun`] counts as working memory, sort runs are
/// reported separately (their size is a configuration choice, not an
/// algorithmic requirement).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemClass {
    /// Dense tensor and matrix buffers.
    Dense,
    /// In-RAM coordinate records (indices, values, fiber permutations).
    Coo,
    /// Sparse slice matrices (CSR arrays) and slice read buffers.
    Slice,
    /// External-sort run buffers.
    SortRun,
}

const N_CLASSES: usize = 4;

impl MemClass {
    fn idx(self) -> usize {
        match self {
            MemClass::Dense => 0,
            MemClass::Coo => 1,
            MemClass::Slice => 2,
            MemClass::SortRun => 3,
        }
    }
}

#[derive(Default, Clone)]
struct Scope {
    base: [i64; N_CLASSES],
    peak_total: i64,
    peak_work: i64,
    peak_by_class: [i64; N_CLASSES],
}

#[derive(Default)]
struct TrackState {
    current: [i64; N_CLASSES],
    scopes: Vec<Scope>,
}

thread_local! {
    static STATE: RefCell<TrackState> = RefCell::new(TrackState::default());
}

fn on_change(state: &mut TrackState) {
    let cur = state.current;
    for scope in &mut state.scopes {
        let mut total = 0i64;
        let mut work = 0i64;
        for c in 0..N_CLASSES {
            let rel = cur[c] - scope.base[c];
            scope.peak_by_class[c] = scope.peak_by_class[c].max(rel);
            total += rel;
            if c != MemClass::SortRun.idx() {
                work += rel;
            }
        }
        scope.peak_total = scope.peak_total.max(total);
        scope.peak_work = scope.peak_work.max(work);
    }
}

fn record_alloc(class: MemClass, bytes: usize) {
    if bytes == 0 {
        return;
    }
    STATE.with(|s| {
        let mut state = s.borrow_mut();
        state.current[class.idx()] += bytes as i64;
        on_change(&mut state);
    });
}

fn record_free(class: MemClass, bytes: usize) {
    if bytes == 0 {
        return;
    }
    STATE.with(|s| {
        let mut state = s.borrow_mut();
        state.current[class.idx()] -= bytes as i64;
    });
}

/// High-water marks observed within one [`measure`] scope, in bytes.
#[derive(Debug, Clone, Copy, Default)]
pub struct MemReport {
    /// Peak over all classes.
    pub peak_total_bytes: u64,
    /// Peak over everything except sort-run buffers.
    pub peak_work_bytes: u64,
    /// Peak of the sort-run buffers alone.
    pub peak_sort_bytes: u64,
}

/// Runs `f` and reports the peak instrumented allocation reached inside it.
///
/// Scopes nest; each reports the peak relative to its own entry point.
pub fn measure<R>(f: impl FnOnce() -> R) -> (R, MemReport) {
    STATE.with(|s| {
        let mut state = s.borrow_mut();
        let base = state.current;
        state.scopes.push(Scope {
            base,
            ..Scope::default()
        });
    });
    let result = f();
    let report = STATE.with(|s| {
        let mut state = s.borrow_mut();
        let scope = state.scopes.pop().expect("scope stack underflow");
        MemReport {
            peak_total_bytes: scope.peak_total.max(0) as u64,
            peak_work_bytes: scope.peak_work.max(0) as u64,
            peak_sort_bytes: scope.peak_by_class[MemClass::SortRun.idx()].max(0) as u64,
        }
    });
    (result, report)
}

/// A `Vec` that reports its capacity to the per-thread tracker.
///
/// Capacity changes go through the provided methods so the counters stay
/// consistent; the contents are reachable through `Deref`.
#[derive(Debug)]
pub struct TrackedBuf<T> {
    data: Vec<T>,
    class: MemClass,
}

impl<T> TrackedBuf<T> {
    fn cap_bytes(v: &Vec<T>) -> usize {
        v.capacity() * std::mem::size_of::<T>()
    }

    pub fn new(class: MemClass) -> Self {
        Self {
            data: Vec::new(),
            class,
        }
    }

    pub fn with_capacity(class: MemClass, cap: usize) -> Self {
        let data = Vec::with_capacity(cap);
        record_alloc(class, Self::cap_bytes(&data));
        Self { data, class }
    }

    pub fn from_vec(class: MemClass, data: Vec<T>) -> Self {
        record_alloc(class, Self::cap_bytes(&data));
        Self { data, class }
    }

    pub fn push(&mut self, value: T) {
        let before = Self::cap_bytes(&self.data);
        self.data.push(value);
        let after = Self::cap_bytes(&self.data);
        if after > before {
            record_alloc(self.class, after - before);
        }
    }

    pub fn extend_from_slice(&mut self, values: &[T])
    where
        T: Clone,
    {
        let before = Self::cap_bytes(&self.data);
        self.data.extend_from_slice(values);
        let after = Self::cap_bytes(&self.data);
        if after > before {
            record_alloc(self.class, after - before);
        }
    }

    pub fn clear(&mut self) {
        self.data.clear();
    }

    pub fn into_vec(mut self) -> Vec<T> {
        record_free(self.class, Self::cap_bytes(&self.data));
        std::mem::take(&mut self.data)
    }
}

impl<T: Clone + Default> TrackedBuf<T> {
    pub fn zeroed(class: MemClass, len: usize) -> Self {
        let data = vec![T::default(); len];
        record_alloc(class, Self::cap_bytes(&data));
        Self { data, class }
    }
}

impl<T> Deref for TrackedBuf<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.data
    }
}

impl<T> DerefMut for TrackedBuf<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
}

impl<T: Clone> Clone for TrackedBuf<T> {
    fn clone(&self) -> Self {
        Self::from_vec(self.class, self.data.clone())
    }
}

impl<T> Drop for TrackedBuf<T> {
    fn drop(&mut self) {
        record_free(self.class, Self::cap_bytes(&self.data));
    }
}

impl<T: PartialEq> PartialEq for TrackedBuf<T> {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data
    }
}
