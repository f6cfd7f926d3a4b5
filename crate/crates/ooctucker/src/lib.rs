//! Out-of-core Tucker decomposition of large sparse tensors.
//!
//! Four algorithms over third- and fourth-order tensors, all producing a
//! Tucker model `x ≈ ⟦core; F0, …⟧` with orthonormal factors, but with very
//! different memory behaviour:
//!
//! * **HO-SVD**: one eigendecomposition per mode, no iteration; needs the
//!   tensor in RAM.
//! * **HOOI**: alternating least squares refining every factor against all
//!   the others; needs the tensor in RAM; best fit.
//! * **SP** (slice projection): ALS over slices streamed from disk, one
//!   helper factor per update, core growth as the stopping rule.
//! * **MP** (multislice projection): ALS over slices streamed from disk,
//!   all other factors per update, slice-wise fit as the stopping rule.
//!
//! The out-of-core path never materializes the input tensor: the coordinate
//! text file is externally sorted by mode, cut into per-index sparse slice
//! matrices stored in slab files, and every Gram accumulation, core
//! contraction and fit evaluation walks those slices one at a time.
//!
//! See the `book/` directory of the repository for a guided tour, and the
//! `ooctucker` binary for the command-line interface (`gen`, `run`, `bench`,
//! `aggregate`, `inspect`).

// Index arithmetic over modes and strides reads clearer as plain loops.
#![allow(clippy::needless_range_loop)]

pub mod bench;
pub mod coo;
pub mod decomp;
pub mod eig;
pub mod error;
pub mod extsort;
pub mod matrix;
pub mod mem;
pub mod model;
pub mod store;
pub mod tensor;

mod util;

#[cfg(test)]
pub(crate) mod testsupport;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::TuckerModel;
pub use tensor::{fit, DenseTensor};

// The book's code samples double as doc-tests so the guide cannot drift
// from the API.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub struct $name;
        };
    }

    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(GettingStarted, "../../../book/src/getting-started.md");
    chapter!(TensorsAndUnfoldings, "../../../book/src/tensors.md");
    chapter!(FitMetric, "../../../book/src/fit.md");
    chapter!(InRamAlgorithms, "../../../book/src/in-ram-algorithms.md");
    chapter!(OutOfCorePipeline, "../../../book/src/out-of-core.md");
    chapter!(SliceAlgorithms, "../../../book/src/slice-algorithms.md");
    chapter!(FileFormats, "../../../book/src/file-formats.md");
    chapter!(Benchmarking, "../../../book/src/benchmarking.md");
    chapter!(MemoryAccounting, "../../../book/src/memory.md");
}
