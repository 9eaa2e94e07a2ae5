#![no_main]

use libfuzzer_sys::fuzz_target;
use psyling::model::{TextClassifier, TrainedModel};

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = TrainedModel::from_bytes(data) {
        let _ = model.prob_yes("Where can I find the manual?");
    }
});
