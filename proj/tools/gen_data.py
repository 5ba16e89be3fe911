#!/usr/bin/env python3
"""Regenerates catalogs/*.json and schemas/innodb63.json.

Ranges follow the MySQL 8.0 reference manual where a variable's documented
range is usable; open-ended or 64-bit maxima are capped at practical values.
"""
import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent
KiB, MiB, GiB = 1024, 1024**2, 1024**3


def i(name, lo, hi, default, unit="count", restart=False, log=False):
    return {"name": name, "kind": "integer", "min": lo, "max": hi, "default": default,
            "scale": "log" if log else "linear", "unit": unit, "restart_required": restart}


def b_(name, lo, hi, default, restart=False):
    # byte-sized knobs are log scale
    return i(name, lo, hi, default, unit="bytes", restart=restart, log=True)


def r(name, lo, hi, default, unit="", restart=False):
    return {"name": name, "kind": "real", "min": lo, "max": hi, "default": default,
            "scale": "linear", "unit": unit, "restart_required": restart}


def e(name, values, default, restart=False):
    return {"name": name, "kind": "enum", "enum_values": values, "default": default,
            "scale": "linear", "unit": "", "restart_required": restart}


def flag(name, default, restart=False):
    return {"name": name, "kind": "boolean", "default": default, "scale": "linear", "unit": "",
            "restart_required": restart}


INNODB = [
    flag("innodb_adaptive_flushing", True),
    r("innodb_adaptive_flushing_lwm", 0, 70, 10, "percent"),
    flag("innodb_adaptive_hash_index", True),
    i("innodb_adaptive_hash_index_parts", 1, 512, 8, restart=True),
    i("innodb_adaptive_max_sleep_delay", 0, 1000000, 150000, "microseconds"),
    i("innodb_autoextend_increment", 1, 1000, 64, "MiB"),
    e("innodb_autoinc_lock_mode", ["0", "1", "2"], "2", restart=True),
    b_("innodb_buffer_pool_chunk_size", 1 * MiB, 1 * GiB, 128 * MiB, restart=True),
    i("innodb_buffer_pool_instances", 1, 64, 8, restart=True),
    b_("innodb_buffer_pool_size", 5 * MiB, 128 * GiB, 128 * MiB),
    i("innodb_change_buffer_max_size", 0, 50, 25, "percent"),
    e("innodb_change_buffering", ["none", "inserts", "deletes", "changes", "purges", "all"], "all"),
    e("innodb_checksum_algorithm", ["crc32", "strict_crc32", "innodb", "strict_innodb", "none", "strict_none"], "crc32"),
    flag("innodb_cmp_per_index_enabled", False),
    i("innodb_commit_concurrency", 0, 1000, 0, restart=True),
    i("innodb_compression_failure_threshold_pct", 0, 100, 5, "percent"),
    i("innodb_compression_level", 0, 9, 6),
    i("innodb_compression_pad_pct_max", 0, 75, 50, "percent"),
    i("innodb_concurrency_tickets", 1, 100000, 5000),
    flag("innodb_deadlock_detect", True),
    flag("innodb_disable_sort_file_cache", False),
    flag("innodb_doublewrite", True, restart=True),
    e("innodb_fast_shutdown", ["0", "1", "2"], "1"),
    i("innodb_fill_factor", 10, 100, 100, "percent"),
    i("innodb_flush_log_at_timeout", 1, 2700, 1, "seconds"),
    e("innodb_flush_log_at_trx_commit", ["0", "1", "2"], "1"),
    e("innodb_flush_method", ["fsync", "O_DSYNC", "littlesync", "nosync", "O_DIRECT", "O_DIRECT_NO_FSYNC"], "fsync",
      restart=True),
    e("innodb_flush_neighbors", ["0", "1", "2"], "0"),
    flag("innodb_flush_sync", True),
    i("innodb_flushing_avg_loops", 1, 1000, 30),
    b_("innodb_ft_cache_size", 1600000, 80000000, 8000000, restart=True),
    flag("innodb_ft_enable_diag_print", False),
    i("innodb_ft_max_token_size", 10, 84, 84, restart=True),
    i("innodb_ft_min_token_size", 0, 16, 3, restart=True),
    i("innodb_ft_num_word_optimize", 1000, 10000, 2000),
    b_("innodb_ft_result_cache_limit", 1000000, 4294967295, 2000000000),
    i("innodb_ft_sort_pll_degree", 1, 16, 2, restart=True),
    b_("innodb_ft_total_cache_size", 32000000, 1600000000, 640000000, restart=True),
    i("innodb_io_capacity", 100, 20000, 200, "iops"),
    i("innodb_io_capacity_max", 100, 40000, 2000, "iops"),
    i("innodb_lock_wait_timeout", 1, 3600, 50, "seconds"),
    b_("innodb_log_buffer_size", 256 * KiB, 4 * GiB, 16 * MiB),
    flag("innodb_log_checksums", True),
    flag("innodb_log_compressed_pages", True),
    b_("innodb_log_file_size", 4 * MiB, 16 * GiB, 48 * MiB, restart=True),
    i("innodb_log_files_in_group", 2, 100, 2, restart=True),
    i("innodb_log_spin_cpu_abs_lwm", 0, 1000, 80, "percent"),
    i("innodb_log_spin_cpu_pct_hwm", 0, 100, 50, "percent"),
    i("innodb_log_wait_for_flush_spin_hwm", 0, 10000, 400, "microseconds"),
    b_("innodb_log_write_ahead_size", 512, 16384, 8192),
    flag("innodb_log_writer_threads", True),
    i("innodb_lru_scan_depth", 100, 10000, 1024, "pages"),
    r("innodb_max_dirty_pages_pct", 0, 99.999, 90, "percent"),
    r("innodb_max_dirty_pages_pct_lwm", 0, 99.999, 10, "percent"),
    i("innodb_max_purge_lag", 0, 1000000, 0),
    i("innodb_max_purge_lag_delay", 0, 10000000, 0, "microseconds"),
    b_("innodb_max_undo_log_size", 10 * MiB, 16 * GiB, 1 * GiB),
    flag("innodb_numa_interleave", False, restart=True),
    i("innodb_old_blocks_pct", 5, 95, 37, "percent"),
    i("innodb_old_blocks_time", 0, 10000, 1000, "milliseconds"),
    b_("innodb_online_alter_log_max_size", 65536, 16 * GiB, 128 * MiB),
    i("innodb_open_files", 10, 100000, 4000, restart=True),
    flag("innodb_optimize_fulltext_only", False),
    i("innodb_page_cleaners", 1, 64, 4, restart=True),
    i("innodb_parallel_read_threads", 1, 256, 4),
    flag("innodb_print_all_deadlocks", False),
    i("innodb_purge_batch_size", 1, 5000, 300),
    i("innodb_purge_rseg_truncate_frequency", 1, 128, 128),
    i("innodb_purge_threads", 1, 32, 4, restart=True),
    flag("innodb_random_read_ahead", False),
    i("innodb_read_ahead_threshold", 0, 64, 56, "pages"),
    i("innodb_read_io_threads", 1, 64, 4, restart=True),
    b_("innodb_redo_log_capacity", 8 * MiB, 128 * GiB, 100 * MiB),
    i("innodb_replication_delay", 0, 10000, 0, "milliseconds"),
    flag("innodb_rollback_on_timeout", False, restart=True),
    i("innodb_rollback_segments", 1, 128, 128),
    r("innodb_segment_reserve_factor", 0.03, 40, 12.5, "percent"),
    b_("innodb_sort_buffer_size", 65536, 64 * MiB, 1 * MiB, restart=True),
    i("innodb_spin_wait_delay", 0, 1000, 6),
    i("innodb_spin_wait_pause_multiplier", 0, 100, 50),
    flag("innodb_stats_auto_recalc", True),
    flag("innodb_stats_include_delete_marked", False),
    e("innodb_stats_method", ["nulls_equal", "nulls_unequal", "nulls_ignored"], "nulls_equal"),
    flag("innodb_stats_on_metadata", False),
    flag("innodb_stats_persistent", True),
    i("innodb_stats_persistent_sample_pages", 1, 10000, 20, "pages"),
    i("innodb_stats_transient_sample_pages", 1, 10000, 8, "pages"),
    flag("innodb_status_output", False),
    flag("innodb_status_output_locks", False),
    flag("innodb_strict_mode", True),
    i("innodb_sync_array_size", 1, 1024, 1, restart=True),
    i("innodb_sync_spin_loops", 0, 10000, 30),
    flag("innodb_table_locks", True),
    i("innodb_thread_concurrency", 0, 1000, 0),
    i("innodb_thread_sleep_delay", 0, 1000000, 10000, "microseconds"),
    flag("innodb_undo_log_truncate", True),
    flag("innodb_use_native_aio", True, restart=True),
    i("innodb_write_io_threads", 1, 64, 4, restart=True),
    i("innodb_ddl_threads", 1, 64, 4),
    b_("innodb_ddl_buffer_size", 65536, 4294967295, 1 * MiB),
    i("innodb_idle_flush_pct", 0, 100, 100, "percent"),
    flag("innodb_extend_and_initialize", True),
    i("innodb_fsync_threshold", 0, 1 * GiB, 0, "bytes"),
    flag("innodb_dedicated_server", False, restart=True),
]

SERVER = [
    i("max_connections", 1, 100000, 151),
    i("max_user_connections", 0, 100000, 0),
    i("back_log", 1, 65535, 151, restart=True),
    i("thread_cache_size", 0, 16384, 9),
    i("table_open_cache", 1, 524288, 4000),
    i("table_open_cache_instances", 1, 64, 16, restart=True),
    i("table_definition_cache", 400, 524288, 2000),
    i("open_files_limit", 0, 1048576, 5000, restart=True),
    b_("sort_buffer_size", 32768, 4 * GiB, 262144),
    b_("join_buffer_size", 128, 4 * GiB, 262144),
    b_("read_buffer_size", 8192, 2147479552, 131072),
    b_("read_rnd_buffer_size", 1, 2147483647, 262144),
    b_("tmp_table_size", 1024, 64 * GiB, 16 * MiB),
    b_("max_heap_table_size", 16384, 64 * GiB, 16 * MiB),
    b_("key_buffer_size", 8, 64 * GiB, 8 * MiB),
    i("key_cache_block_size", 512, 16384, 1024, "bytes"),
    i("key_cache_division_limit", 1, 100, 100, "percent"),
    i("key_cache_age_threshold", 100, 1000000, 300),
    b_("bulk_insert_buffer_size", 4096, 4 * GiB, 8 * MiB),
    b_("max_allowed_packet", 1024, 1 * GiB, 64 * MiB),
    b_("net_buffer_length", 1024, 1 * MiB, 16384),
    i("net_read_timeout", 1, 3600, 30, "seconds"),
    i("net_write_timeout", 1, 3600, 60, "seconds"),
    i("net_retry_count", 1, 1000, 10),
    i("wait_timeout", 1, 86400, 28800, "seconds"),
    i("interactive_timeout", 1, 86400, 28800, "seconds"),
    i("connect_timeout", 2, 3600, 10, "seconds"),
    i("lock_wait_timeout", 1, 31536000, 31536000, "seconds"),
    i("max_prepared_stmt_count", 0, 4194304, 16382),
    i("max_sort_length", 4, 8388608, 1024, "bytes"),
    i("max_length_for_sort_data", 4, 8388608, 4096, "bytes"),
    i("max_seeks_for_key", 1, 4294967295, 4294967295, log=True),
    i("max_execution_time", 0, 3600000, 0, "milliseconds"),
    i("max_error_count", 0, 65535, 1024),
    i("max_sp_recursion_depth", 0, 255, 0),
    i("max_write_lock_count", 1, 4294967295, 4294967295, log=True),
    b_("group_concat_max_len", 4, 4294967295, 1024),
    r("long_query_time", 0, 3600, 10, "seconds"),
    flag("slow_query_log", False),
    flag("general_log", False),
    flag("log_queries_not_using_indexes", False),
    i("min_examined_row_limit", 0, 1000000, 0),
    b_("query_alloc_block_size", 1024, 4294967295, 8192),
    b_("query_prealloc_size", 8192, 4294967295, 8192),
    b_("range_alloc_block_size", 4096, 4294967295, 4096),
    i("range_optimizer_max_mem_size", 0, 4 * GiB, 8 * MiB, "bytes"),
    b_("transaction_alloc_block_size", 1024, 131072, 8192),
    b_("transaction_prealloc_size", 1024, 131072, 4096),
    b_("preload_buffer_size", 1024, 1 * GiB, 32768),
    i("stored_program_cache", 16, 524288, 256),
    i("stored_program_definition_cache", 256, 524288, 256),
    i("schema_definition_cache", 256, 524288, 256),
    i("tablespace_definition_cache", 256, 524288, 256),
    b_("thread_stack", 131072, 16 * MiB, 1 * MiB, restart=True),
    e("thread_handling", ["one-thread-per-connection", "no-threads"], "one-thread-per-connection", restart=True),
    i("host_cache_size", 0, 65536, 279),
    i("eq_range_index_dive_limit", 0, 10000, 200),
    flag("optimizer_prune_level", True),
    i("optimizer_search_depth", 0, 62, 62),
    i("cte_max_recursion_depth", 0, 100000, 1000),
    i("div_precision_increment", 0, 30, 4),
    i("ft_min_word_len", 1, 84, 4, restart=True),
    i("ft_max_word_len", 10, 84, 84, restart=True),
    i("ft_query_expansion_limit", 0, 1000, 20),
    e("concurrent_insert", ["NEVER", "AUTO", "ALWAYS"], "AUTO"),
    flag("low_priority_updates", False),
    flag("big_tables", False),
    flag("autocommit", True),
    e("transaction_isolation", ["READ-UNCOMMITTED", "READ-COMMITTED", "REPEATABLE-READ", "SERIALIZABLE"],
      "REPEATABLE-READ"),
    e("completion_type", ["NO_CHAIN", "CHAIN", "RELEASE"], "NO_CHAIN"),
    flag("flush", False),
    i("flush_time", 0, 31536000, 0, "seconds"),
    e("delay_key_write", ["OFF", "ON", "ALL"], "ON"),
    b_("myisam_sort_buffer_size", 4096, 16 * GiB, 8 * MiB),
    i("myisam_repair_threads", 1, 64, 1),
    flag("myisam_use_mmap", False),
    i("myisam_data_pointer_size", 2, 7, 6, "bytes"),
    e("myisam_stats_method", ["nulls_equal", "nulls_unequal", "nulls_ignored"], "nulls_unequal"),
    b_("temptable_max_ram", 2 * MiB, 64 * GiB, 1 * GiB),
    i("temptable_max_mmap", 0, 64 * GiB, 1 * GiB, "bytes"),
    flag("temptable_use_mmap", True),
    e("internal_tmp_mem_storage_engine", ["MEMORY", "TempTable"], "TempTable"),
    b_("binlog_cache_size", 4096, 4 * GiB, 32768),
    b_("binlog_stmt_cache_size", 4096, 4 * GiB, 32768),
    b_("max_binlog_cache_size", 4096, 1 << 40, 1 << 40),
    b_("max_binlog_size", 4096, 1 * GiB, 1 * GiB),
    b_("max_binlog_stmt_cache_size", 4096, 1 << 40, 1 << 40),
    i("sync_binlog", 0, 10000, 1),
    e("binlog_format", ["ROW", "STATEMENT", "MIXED"], "ROW"),
    e("binlog_row_image", ["full", "minimal", "noblob"], "full"),
    e("binlog_checksum", ["NONE", "CRC32"], "CRC32"),
    flag("binlog_order_commits", True),
    i("binlog_group_commit_sync_delay", 0, 1000000, 0, "microseconds"),
    i("binlog_group_commit_sync_no_delay_count", 0, 100000, 0),
    i("binlog_expire_logs_seconds", 0, 31536000, 2592000, "seconds"),
    flag("binlog_rows_query_log_events", False),
    i("binlog_transaction_dependency_history_size", 1, 1000000, 25000),
    flag("log_bin_trust_function_creators", False),
    i("sync_relay_log", 0, 10000, 10000),
    i("sync_relay_log_info", 0, 10000, 10000),
    i("sync_master_info", 0, 10000, 10000),
    i("relay_log_space_limit", 0, 64 * GiB, 0, "bytes"),
    i("replica_parallel_workers", 0, 1024, 4),
    flag("replica_preserve_commit_order", True),
    b_("replica_pending_jobs_size_max", 1024, 16 * GiB, 128 * MiB),
    i("replica_checkpoint_period", 1, 4294967295, 300, "milliseconds", log=True),
    i("replica_checkpoint_group", 32, 524280, 512),
    i("replica_net_timeout", 1, 31536000, 60, "seconds"),
    b_("histogram_generation_max_mem_size", 1000000, 4 * GiB, 20000000),
    b_("parser_max_mem_size", 10000000, 1 << 40, 1 << 40),
    b_("select_into_buffer_size", 8192, 2147479552, 131072),
    flag("select_into_disk_sync", False),
    i("select_into_disk_sync_delay", 0, 31536000, 0, "milliseconds"),
    flag("windowing_use_high_precision", True),
    flag("sql_buffer_result", False),
    flag("sql_auto_is_null", False),
    flag("end_markers_in_json", False),
    flag("explicit_defaults_for_timestamp", True),
    e("default_tmp_storage_engine", ["InnoDB", "MEMORY", "MyISAM"], "InnoDB"),
    e("default_storage_engine", ["InnoDB", "MEMORY", "MyISAM"], "InnoDB"),
    i("information_schema_stats_expiry", 0, 31536000, 86400, "seconds"),
    i("log_error_verbosity", 1, 3, 2),
    flag("log_slow_admin_statements", False),
    flag("log_slow_extra", False),
    i("log_throttle_queries_not_using_indexes", 0, 1000000, 0),
    i("max_points_in_geometry", 3, 1048576, 65536),
    flag("skip_name_resolve", False, restart=True),
    i("ngram_token_size", 1, 10, 2, restart=True),
    i("regexp_time_limit", 0, 2147483647, 32, log=False),
    i("regexp_stack_limit", 0, 2147483647, 8000000, "bytes"),
    flag("show_create_table_verbosity", False),
    flag("updatable_views_with_limit", True),
    flag("performance_schema", True, restart=True),
]

PERF_SCHEMA_SIZES = [
    ("accounts_size", 100), ("digests_size", 10000), ("events_stages_history_long_size", 10000),
    ("events_stages_history_size", 10), ("events_statements_history_long_size", 10000),
    ("events_statements_history_size", 10), ("events_transactions_history_long_size", 10000),
    ("events_transactions_history_size", 10), ("events_waits_history_long_size", 10000),
    ("events_waits_history_size", 10), ("hosts_size", 100), ("max_cond_instances", 2000), ("max_digest_length", 1024),
    ("max_file_handles", 32768), ("max_file_instances", 10000), ("max_index_stat", 5000),
    ("max_metadata_locks", 10000), ("max_mutex_instances", 10000), ("max_prepared_statements_instances", 1000),
    ("max_program_instances", 1000), ("max_rwlock_instances", 10000),
    ("max_socket_instances", 1000), ("max_sql_text_length", 1024),
    ("max_statement_stack", 10),
    ("max_table_handles", 1000), ("max_table_instances", 1000), ("max_table_lock_stat", 1000),
    ("max_thread_instances", 1000), ("users_size", 100),
]


def perf_schema():
    out = []
    for suffix, default in PERF_SCHEMA_SIZES:
        out.append(i("performance_schema_" + suffix, 0, max(1048576, default * 16), default, restart=True))
    return out


STATE = ["metadata_mem_pool_size", "lock_row_lock_time_max", "lock_row_lock_time_avg", "buffer_pool_size",
         "buffer_pool_pages_total", "buffer_pool_pages_misc", "buffer_pool_pages_data", "buffer_pool_bytes_data",
         "buffer_pool_pages_dirty", "buffer_pool_bytes_dirty", "buffer_pool_pages_free", "trx_rseg_history_len",
         "file_num_open_files", "innodb_page_size"]
CURRENT = ["lock_row_lock_current_waits", "buffer_pool_read_ahead_evicted", "ibuf_merges_discard_delete_mark",
           "innodb_rwlock_s_spin_rounds", "innodb_rwlock_x_spin_rounds", "innodb_rwlock_s_os_waits",
           "innodb_rwlock_x_os_waits", "innodb_dblwr_pages_written", "innodb_rwlock_s_spin_waits",
           "innodb_rwlock_x_spin_waits", "ibuf_merges_discard_delete", "buffer_pool_read_requests",
           "buffer_pool_write_requests"]
CUMULATIVE = [
    "lock_row_lock_time", "lock_row_lock_waits", "buffer_pool_wait_free", "buffer_pool_read_ahead",
    "adaptive_hash_searches", "adaptive_hash_searches_btree", "ibuf_merges_delete_mark", "ibuf_merges_discard_insert",
    "os_log_pending_fsyncs", "os_log_pending_writes", "os_log_bytes_written", "innodb_activity_count",
    "buffer_pages_written", "buffer_pages_read", "buffer_data_reads", "buffer_data_written", "ibuf_merges_insert",
    "ibuf_merges_delete", "innodb_dblwr_writes", "buffer_pool_reads", "buffer_pages_created", "log_write_requests",
    "os_data_reads", "os_data_writes",
    "os_data_fsyncs", "os_log_fsyncs", "lock_deadlocks", "lock_timeouts", "log_waits", "log_writes", "ibuf_merges",
    "ibuf_size", "dml_reads", "dml_inserts", "dml_deletes", "dml_updates"]

# Knobs with a planted effect in the synthetic model. Defaults sit mid-range
# and 0.25-0.35 away from the optimum so the trust window sees a gradient.
SYNTHETIC_INFLUENTIAL = [
    b_("innodb_buffer_pool_size", 128 * MiB, 128 * GiB, 4 * GiB),
    i("innodb_thread_concurrency", 0, 128, 64),
    i("innodb_io_capacity", 100, 20000, 10000, "iops"),
    b_("innodb_log_file_size", 4 * MiB, 16 * GiB, 128 * MiB, restart=True),
    i("innodb_lru_scan_depth", 100, 10000, 5000, "pages"),
]

SYNTHETIC_OTHERS = [
    "innodb_adaptive_flushing", "innodb_adaptive_flushing_lwm", "innodb_adaptive_hash_index",
    "innodb_buffer_pool_instances", "innodb_change_buffer_max_size", "innodb_change_buffering",
    "innodb_concurrency_tickets", "innodb_doublewrite", "innodb_flush_log_at_trx_commit", "innodb_flush_method",
    "innodb_flush_neighbors", "innodb_io_capacity_max", "innodb_lock_wait_timeout", "innodb_log_buffer_size",
    "innodb_max_dirty_pages_pct", "innodb_max_dirty_pages_pct_lwm", "innodb_old_blocks_pct", "innodb_old_blocks_time",
    "innodb_open_files", "innodb_page_cleaners", "innodb_purge_threads", "innodb_read_ahead_threshold",
    "innodb_read_io_threads", "innodb_write_io_threads", "innodb_spin_wait_delay", "innodb_sync_spin_loops",
    "innodb_stats_persistent_sample_pages", "innodb_random_read_ahead", "max_connections", "thread_cache_size",
    "table_open_cache", "table_open_cache_instances", "sort_buffer_size", "join_buffer_size", "read_buffer_size",
    "read_rnd_buffer_size", "tmp_table_size", "max_heap_table_size", "key_buffer_size", "binlog_cache_size",
    "sync_binlog", "binlog_format", "transaction_isolation", "long_query_time", "eq_range_index_dive_limit",
]


def main():
    full = INNODB + SERVER + perf_schema()
    names = [k["name"] for k in full]
    assert len(names) == len(set(names)), "duplicate knob names"
    assert len(full) == 266, f"mysql catalog has {len(full)} knobs"
    by_name = {k["name"]: k for k in full}

    synthetic = SYNTHETIC_INFLUENTIAL + [by_name[n] for n in SYNTHETIC_OTHERS]
    assert len(synthetic) == 50, f"synthetic catalog has {len(synthetic)} knobs"

    schema = ([{"name": n, "agg": "instant"} for n in STATE + CURRENT] +
              [{"name": n, "agg": "counter"} for n in CUMULATIVE])
    assert len(schema) == 63

    for path, data in [("catalogs/mysql266.json", full), ("catalogs/synthetic50.json", synthetic),
                       ("schemas/innodb63.json", schema)]:
        p = ROOT / path
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(data, indent=2) + "\n")
        print(f"wrote {path} ({len(data)} entries)")


if __name__ == "__main__":
    main()
