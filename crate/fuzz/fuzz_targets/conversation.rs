#![no_main]

use libfuzzer_sys::fuzz_target;
use psyling::adapt::{parse_conversations_jsonl, Conversation};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = Conversation::from_json(text) {
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(Conversation::from_json(&json).unwrap(), c);
    }
    let _ = parse_conversations_jsonl(text);
});
