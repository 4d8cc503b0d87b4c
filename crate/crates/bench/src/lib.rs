//! Fixtures shared by the criterion benches.

use nestq::{generate, make_event_with_counts, ColumnarRowGroup, Event, GenConfig};

/// Seeded events with the default multiplicities.
pub fn events(seed: u64, n: u64) -> Vec<Event> {
    generate(&GenConfig::with_seed(seed, n))
        .expect("default config is valid")
        .collect()
}

/// One row group of `n` events that each carry `jets` jets.
pub fn fixed_jet_row_group(n: usize, jets: usize) -> ColumnarRowGroup {
    let events: Vec<Event> = (0..n as u64)
        .map(|s| make_event_with_counts(s, jets, 2, 1))
        .collect();
    ColumnarRowGroup::from_events(&events)
}
