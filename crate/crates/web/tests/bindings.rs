use serde_json::Value;

fn two_pairs() -> String {
    std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/two_pairs.toml")).unwrap()
}

#[test]
fn analyze_finds_both_pairs_with_observation_positions() {
    let v: Value = serde_json::from_str(&socialnav_web::analyze(&two_pairs()).unwrap()).unwrap();
    let groups = v["groups"].as_array().unwrap();
    assert_eq!(groups.len(), 2);
    assert_eq!(groups[0]["members"], serde_json::json!([1, 2]));
    let oop = groups[0]["oop"].as_array().unwrap();
    assert!((oop[0].as_f64().unwrap() - 3.5).abs() < 1e-6);
    assert_eq!(v["persons"].as_array().unwrap().len(), 4);
}

#[test]
fn field_returns_two_numbers_per_cell() {
    let v: Value = serde_json::from_str(&socialnav_web::field(&two_pairs(), 0.5).unwrap()).unwrap();
    let (nx, ny) = (v["nx"].as_u64().unwrap(), v["ny"].as_u64().unwrap());
    assert_eq!((nx, ny), (29, 17));
    assert_eq!(v["vectors"].as_array().unwrap().len() as u64, 2 * nx * ny);
    assert!(socialnav_web::field(&two_pairs(), 0.0).is_err());
}

#[test]
fn tour_visits_every_group_and_repeats() {
    let a = socialnav_web::tour(&two_pairs(), "vmd", 3).unwrap();
    assert_eq!(a, socialnav_web::tour(&two_pairs(), "vmd", 3).unwrap());
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["legs"].as_array().unwrap().len(), 2);
    assert!(v["length"].as_f64().unwrap() > 10.0);
}

#[test]
fn bad_input_is_an_error_string() {
    assert!(socialnav_web::analyze("size = 3").unwrap_err().contains("scenario"));
    assert!(socialnav_web::tour(&two_pairs(), "dijkstra", 0)
        .unwrap_err()
        .contains("unknown planner"));
}

#[test]
fn analyze_echoes_obstacles_for_drawing() {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../scenarios/three_groups.toml"
    ))
    .unwrap();
    let v: Value = serde_json::from_str(&socialnav_web::analyze(&text).unwrap()).unwrap();
    let obstacles = v["obstacles"].as_array().unwrap();
    assert_eq!(obstacles.len(), 2);
    assert_eq!(obstacles[0]["rect"]["x_min"], 6.0);
    assert_eq!(v["persons"][0][0], 1.0);
}
