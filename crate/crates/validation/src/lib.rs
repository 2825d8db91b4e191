// SPDX-License-Identifier: Apache-2.0

//! Holds the `acceptance` test target, which exercises the numerical core,
//! sessions and benchmarks together: `cargo test -p pvil-validation`.
