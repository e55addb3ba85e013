//! Shared helpers for the benchmark targets.

use hybridnet::io::{synth_dataset, DatasetSplit, SplitTag, SynthSpec};

/// A small deterministic grating set shared by the pipeline benchmarks.
pub fn bench_dataset(count: usize) -> DatasetSplit {
    let spec = SynthSpec {
        classes: 3,
        height: 20,
        width: 20,
        channels: 1,
        noise: 0.2,
    };
    synth_dataset(&spec, count, SplitTag::Train, 42).expect("bench dataset")
}
