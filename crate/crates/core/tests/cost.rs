mod oracles;

use outliernet::arch::{
    count_flops, count_macs, count_params, make_template, make_template_with_widths, save_bundle, load_bundle,
    EfficiencyReport, Family, ModelBundle, NormStats, FIXED_HEADER_BYTES,
};
use proptest::prelude::*;

fn reference_686() -> outliernet::arch::ArchSpec {
    make_template_with_widths(Family::FanConv, &[5, 25], None, "fan-686").unwrap()
}

/// (architecture, params, FLOPs), counted by hand layer by layer.
fn pinned() -> Vec<(outliernet::arch::ArchSpec, usize, u64)> {
    vec![
        (reference_686(), 686, 1_573_632),
        (make_template(Family::FanConv, 0.5, 2, None).unwrap(), 279, 817_152),
        (make_template(Family::SliderDenseBottleneck, 0.25, 2, Some(8)).unwrap(), 17_837, 553_488),
    ]
}

#[test]
fn pinned_reference_counts() {
    for (arch, params, flops) in pinned() {
        assert_eq!(count_params(&arch), params, "{}", arch.name());
        assert_eq!(count_flops(&arch), flops, "{}", arch.name());
        let (macs, loop_flops) = oracles::loop_count(&arch);
        assert_eq!(count_macs(&arch), macs, "{}", arch.name());
        assert_eq!(loop_flops, flops, "{}", arch.name());
    }
}

#[test]
fn loop_oracle_agrees_across_templates() {
    for family in [Family::FanConv, Family::SliderDenseBottleneck] {
        for depth in 1..=4 {
            for mult in [0.25, 0.5, 1.0] {
                let b = (family == Family::SliderDenseBottleneck).then_some(12);
                let arch = make_template(family, mult, depth, b).unwrap();
                let (macs, flops) = oracles::loop_count(&arch);
                assert_eq!((count_macs(&arch), count_flops(&arch)), (macs, flops), "{}", arch.name());
            }
        }
    }
}

#[test]
fn smallest_reference_is_about_2_7_kb() {
    let arch = reference_686();
    let bundle = ModelBundle::new(arch.clone(), vec![0.0; 686], NormStats { min: -10.0, max: 1.0 }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.olnt");
    save_bundle(&bundle, &path).unwrap();
    let on_disk = std::fs::metadata(&path).unwrap().len() as usize;
    assert_eq!(on_disk, 4 * 686 + bundle.header_bytes());
    assert_eq!(EfficiencyReport::for_arch(&arch).model_bytes, on_disk);
    assert_eq!(load_bundle(&path).unwrap(), bundle);

    // Weights alone: 2744 B = 2.68 KiB, i.e. 2.7 to one decimal.
    let weights_kib = (4 * 686) as f64 / 1024.0;
    assert_eq!(format!("{weights_kib:.1}"), "2.7");
    let file_kib = on_disk as f64 / 1024.0;
    assert!((file_kib - 2.7).abs() <= 0.2, "{file_kib} KiB");
}

proptest! {
    #[test]
    fn file_size_law(
        slider in any::<bool>(),
        mult in prop::sample::select(vec![0.25, 0.5, 0.75, 1.0]),
        depth in 1usize..=3,
        threshold in prop::option::of(0.0f64..10.0),
    ) {
        let family = if slider { Family::SliderDenseBottleneck } else { Family::FanConv };
        let arch = make_template(family, mult, depth, slider.then_some(6)).unwrap();
        let n = count_params(&arch);
        let mut bundle = ModelBundle::new(arch, vec![0.5; n], NormStats { min: 0.0, max: 1.0 }).unwrap();
        bundle.threshold = threshold;
        let bytes = bundle.to_bytes();
        prop_assert_eq!(bytes.len(), 4 * n + bundle.header_bytes());
        prop_assert_eq!(EfficiencyReport::for_bundle(&bundle).model_bytes, bytes.len());
        prop_assert!(bundle.header_bytes() > FIXED_HEADER_BYTES);
        prop_assert_eq!(ModelBundle::from_bytes(&bytes).unwrap(), bundle);
    }
}
