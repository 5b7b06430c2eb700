use std::fs;

use vipatch::image::{load_labels, save_labels, Image};
use vipatch::metrics::ClassMap;
use vipatch::pipeline::fixtures::{generate_fixtures, write_fixtures};
use vipatch::pipeline::{discover, item_seed, load_item, sample_items, Ablation, AttackConfig};
use vipatch::targets::{surrogate_count, SurrogateCountingParams, TargetSpec, Task};
use vipatch::Error;

#[test]
fn config_text_round_trips() {
    let mut c = AttackConfig::new(Task::Segmentation);
    for (k, v) in [
        ("radius", "25"),
        ("alpha", "0.4"),
        ("pop", "12"),
        ("ablation", "position_only"),
        ("beta", "0.3"),
        ("seed", "99"),
        ("endpoint", "tcp://127.0.0.1:7000"),
        ("timeout_ms", "1500"),
        ("max_in_flight", "4"),
    ] {
        c.set(k, v).unwrap();
    }
    let back = AttackConfig::from_text(&c.to_text()).unwrap();
    assert_eq!(back.task, Task::Segmentation);
    assert_eq!(back.radius, Some(25));
    assert_eq!(back.ablation, Ablation::PositionOnly);
    match &back.target {
        TargetSpec::Remote(e) => assert_eq!((e.timeout_ms, e.max_in_flight), (1500, 4)),
        other => panic!("{other:?}"),
    }
    assert_eq!(back.to_text(), c.to_text());
}

#[test]
fn config_defaults_follow_the_task() {
    let c = AttackConfig::from_text("# fusion run\ntask = fusion\n").unwrap();
    assert_eq!(c.radius(), Task::Fusion.default_radius());
    assert_eq!(c.colors(), Task::Fusion.default_colors());
    assert_eq!((c.population, c.generations, c.patience), (30, 200, 10));
    assert_eq!((c.scale_factor, c.crossover_rate), (0.7, 0.9));
}

#[test]
fn bad_config_keys_and_values() {
    let mut c = AttackConfig::new(Task::Counting);
    assert!(matches!(c.set("colour", "3"), Err(Error::Config(_))));
    assert!(matches!(c.set("gens", "many"), Err(Error::Config(_))));
    assert!(matches!(c.set("timeout_ms", "10"), Err(Error::Config(_))));
    assert!(AttackConfig::from_text("radius 3\n").is_err());
    c.alpha = 1.5;
    assert!(c.validate().is_err());
}

#[test]
fn sampling_is_deterministic_and_ordered() {
    let names: Vec<String> = (0..30).map(|i| format!("n{i:02}")).collect();
    let a = sample_items(&names, Some(7), 3, |s| s.as_str());
    assert_eq!(a, sample_items(&names, Some(7), 3, |s| s.as_str()));
    assert_eq!(a.len(), 7);
    assert!(a.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(sample_items(&names, Some(50), 3, |s| s.as_str()), names);
    assert_eq!(sample_items(&names, None, 3, |s| s.as_str()), names);
    assert_ne!(item_seed(1, "a"), item_seed(1, "b"));
    assert_eq!(item_seed(1, "a"), item_seed(1, "a"));
}

#[test]
fn fixtures_count_their_annotations() {
    let params = SurrogateCountingParams::default();
    for f in generate_fixtures(5, 17) {
        let (count, _) = surrogate_count(&f.pair, &params);
        assert_eq!(count as usize, f.points.points().len(), "{}", f.name);
    }
    assert_eq!(generate_fixtures(2, 3), generate_fixtures(2, 3));
}

#[test]
fn fixtures_and_labels_load_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = generate_fixtures(2, 6);
    write_fixtures(dir.path(), &fixtures).unwrap();
    let (w, h) = fixtures[0].pair.dims();
    let labels = ClassMap::new(w, h, (0..w * h).map(|i| (i % 5) as u8).collect()).unwrap();
    save_labels(&labels, dir.path().join("fx000_labels.png")).unwrap();
    assert_eq!(load_labels(dir.path().join("fx000_labels.png")).unwrap(), labels);

    let items = discover(dir.path()).unwrap();
    assert_eq!(items.iter().map(|i| i.name.as_str()).collect::<Vec<_>>(), ["fx000", "fx001"]);
    assert!(items[0].labels.is_some() && items[1].labels.is_none());
    let first = load_item(&items[0]).unwrap();
    assert_eq!(first.truth.labels.as_ref(), Some(&labels));
    assert_eq!(first.truth.points.as_ref(), Some(&fixtures[0].points));
    assert_eq!(first.pair, fixtures[0].pair);

    // A label map of the wrong size is rejected.
    let small = ClassMap::new(4, 4, vec![0; 16]).unwrap();
    save_labels(&small, dir.path().join("fx001_labels.png")).unwrap();
    let items = discover(dir.path()).unwrap();
    assert!(matches!(load_item(&items[1]), Err(Error::Dimension(_))));

    // Color images are not label maps.
    let rgb = dir.path().join("rgb.png");
    vipatch::image::save_image(&Image::filled(4, 4, 3, 0.5), &rgb).unwrap();
    assert!(load_labels(&rgb).is_err());
    fs::remove_file(rgb).unwrap();
}

#[test]
fn empty_directory_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(discover(dir.path()), Err(Error::Config(_))));
}

#[test]
fn radius_range_puts_the_radius_in_the_search() {
    let mut c = AttackConfig::new(Task::Counting);
    c.set("radius_range", "10, 30").unwrap();
    let layout = vipatch::pipeline::layout_for(&c).unwrap();
    assert_eq!(layout.len(), 3 + 3 * c.colors());
    let bounds = layout.bounds((224, 176)).unwrap();
    assert_eq!(bounds[2], (10.0, 30.0));
    assert_eq!(AttackConfig::from_text(&c.to_text()).unwrap().radius_range, Some((10, 30)));
    assert!(c.set("radius_range", "12").is_err());
    c.radius_range = Some((9, 4));
    assert!(c.validate().is_err());
}
