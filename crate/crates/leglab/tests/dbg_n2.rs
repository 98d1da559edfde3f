use leglab::demos::*;
#[test]
fn dbg_n2() {
    let file = build_demo("disk-n2").unwrap();
    match run_demo_file(&file) {
        Ok(_) => println!("ok"),
        Err(e) => println!("ERR {e}"),
    }
}
