//! Fixtures shared by the benchmarks under `benches/`.

use heckfair::data::{generate_synthetic, AttributeModel, SyntheticConfig};
use heckfair::{augment, fit_probit, plain_design, AttributeKind, AugmentedDesign, Dataset, ProbitConfig};

/// Training split of the default biased design with `n` rows.
pub fn train(n: usize, kind: AttributeKind, seed: u64) -> Dataset {
    let base = SyntheticConfig::default();
    generate_synthetic(&SyntheticConfig {
        n,
        n_test: 1,
        seed,
        attribute: AttributeModel { kind, ..base.attribute.clone() },
        ..base
    })
    .expect("default design is valid")
    .train
}

/// Selection-corrected design of a binary-attribute training split.
pub fn augmented(n: usize, seed: u64) -> AugmentedDesign {
    let d = train(n, AttributeKind::Binary, seed);
    let fit = fit_probit(&d.x1, &d.s, &ProbitConfig::default()).expect("probit converges");
    augment(&d, &fit).expect("augment")
}

/// Plain design with a numeric attribute.
pub fn numeric(n: usize, seed: u64) -> AugmentedDesign {
    plain_design(&train(n, AttributeKind::Numeric, seed)).expect("design")
}
