use symsound::picalc::{deduce, Frame, Term, Theory};

mod support;
use support::{check_deduction, naive_deduce};

#[test]
fn deduction_matches_forward_closure() {
    let (yes, no) = check_deduction(7, 500).unwrap();
    assert!(yes > 500 && no > 500, "{yes} derivable, {no} not");
}

#[test]
fn symmetric_decryption() {
    let th = Theory::shipped();
    let (x, y) = (Term::fresh("x"), Term::fresh("y"));
    let c = Term::app("senc", vec![x.clone(), y.clone()]);
    let hidden = Frame::new().restrict("x").restrict("y").output(c.clone());
    assert!(!deduce(&hidden, &x, &th));
    assert!(!naive_deduce(&hidden, &x, &th));
    let opened = hidden.output(y);
    assert!(deduce(&opened, &x, &th));
    assert!(naive_deduce(&opened, &x, &th));
}
