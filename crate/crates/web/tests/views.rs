use soliton_web::{flow_view, scan_view, shot_view};

#[test]
fn shot_has_compact_samples() {
    let v = shot_view(3, 0.951056516295154, 0.309016994374947, 0.0, 30.0).unwrap();
    assert!(v.s.len() > 100);
    assert_eq!(v.s.len(), v.y.len());
    assert_eq!(v.f_sign, 1);
    assert!(shot_view(3, 0.5, 0.5, 0.0, 10.0).is_err());
}

#[test]
fn scan_changes_sign_once() {
    let v = scan_view(3, 0.0, 11, 60.0).unwrap();
    assert_eq!(v.sign.first(), Some(&1));
    assert_eq!(v.sign.last(), Some(&-1));
    let flips = v.sign.windows(2).filter(|w| w[0] != w[1]).count();
    assert_eq!(flips, 1);
}

#[test]
fn flow_stays_in_ball() {
    let v = flow_view([0.01, 0.05, 0.05], 100.0, 4).unwrap();
    assert!(!v.left_ball);
    assert!(flow_view([0.5, 0.0, 0.0], 1.0, 4).is_err());
}
