#![no_main]

use libfuzzer_sys::fuzz_target;
use seglab::lattice::Domain;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(dom) = Domain::from_text(text) {
        let again = Domain::from_text(&dom.to_text()).expect("written domains parse");
        assert_eq!(again, dom);
    }
});
