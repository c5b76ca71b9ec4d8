use crate::common::contract;
use crate::Outcome;

pub fn check() -> Outcome {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| e.to_string())?;
    rt.block_on(async {
        contract::every_read_endpoint_matches_its_schema().await;
        contract::write_endpoints_match_their_schemas().await;
        contract::ma_model_runs_through_the_api().await;
        contract::errors_carry_status_and_code().await;
        contract::restart_serves_identical_bytes().await;
        contract::failed_runs_leave_the_store_untouched().await;
        contract::record_ingest_is_idempotent_per_client_id().await;
    });
    Ok("17 read endpoints schema-valid, error codes, restart byte-identical, failed runs atomic".into())
}
