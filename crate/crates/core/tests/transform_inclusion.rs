mod support;
use support::{check_families, check_relocations};

#[test]
fn generalized_families_include_their_instances() {
    check_families(11, 60).unwrap();
}

#[test]
fn relocated_inputs_stay_included() {
    let checked = check_relocations(12, 60).unwrap();
    assert!(checked >= 50, "{checked}");
}
