//! Shared fixtures for the criterion benches.

use sdp_core::graph::Dataset;
use sdp_core::synthetic;

pub fn bench_dataset() -> Dataset {
    synthetic::community("bench", 2000, 6000, 20, 0.1, 99)
}
