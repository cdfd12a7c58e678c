#include "provtrace/generator.hpp"

#include "provtrace/errors.hpp"
#include "provtrace/sql_analyzer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

namespace provtrace {

using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------------
// Workload description
// ---------------------------------------------------------------------

struct StmtSpec {
    std::string text;
    EventClass klass{EventClass::SpStatement};

    // EXECUTE statements spawn a procedure run; children nest under it.
    std::string exec_proc_key;     // "dbo.name", empty otherwise
    std::string exec_proc_display; // original-case name
    std::vector<StmtSpec> children;

    // Declared lineage of this statement (the ground-truth side of the
    // oracle; never derived from SQL analysis).
    std::vector<std::string> in_tables; // catalog keys "schema.object"
    std::vector<std::string> in_files;  // file paths
    std::vector<std::string> out_tables;
    bool out_query_output{false};
    // "schema.object#col" or "qo#col" (qo = this statement's own output)
    std::map<std::string, std::set<std::string>> colmap;

    std::int64_t cpu_us{120};
    std::int64_t duration_us{400};
    std::optional<std::int64_t> rows_returned;
    std::optional<std::int64_t> rows_inserted;
    std::optional<std::int64_t> rows_updated;
    std::optional<std::int64_t> rows_deleted;
};

struct ActivitySpec {
    std::string id;
    std::string root_text;
    EventClass root_class{EventClass::SqlBatch};
    std::string root_proc_key; // set when the root is EXECUTE <proc>
    std::string root_proc_display;
    std::vector<StmtSpec> stmts;
    EventMetadata meta;
};

std::size_t stmt_count(const std::vector<StmtSpec>& stmts) {
    std::size_t n = 0;
    for (const auto& s : stmts) n += 1 + stmt_count(s.children);
    return n;
}

// ---------------------------------------------------------------------
// Event emission
// ---------------------------------------------------------------------

class Timeline {
public:
    Timeline(std::int64_t start_ts, std::uint64_t seed)
        : ts_(start_ts), rng_(seed) {}

    std::int64_t next_ts() {
        ts_ += 1 + static_cast<std::int64_t>(rng_() % 40);
        return ts_;
    }
    std::uint64_t next_seq() { return seq_++; }
    std::mt19937_64& rng() { return rng_; }

private:
    std::int64_t ts_;
    std::uint64_t seq_{0};
    std::mt19937_64 rng_;
};

QueryEvent make_event(const ActivitySpec& activity, EventKind kind,
                      EventClass klass, const std::string& text,
                      Timeline& timeline) {
    QueryEvent e;
    e.activity_id = activity.id;
    e.ts = timeline.next_ts();
    e.seq = timeline.next_seq();
    e.kind = kind;
    e.klass = klass;
    e.metadata = activity.meta;
    if (kind == EventKind::Started) {
        e.query_text = text;
    } else {
        e.metadata.cpu_time_us = e.metadata.cpu_time_us.value_or(0);
        e.metadata.duration_us = e.metadata.duration_us.value_or(0);
    }
    return e;
}

// Flattened per-activity event plan, interleaved across clients later.
void plan_activity_events(const ActivitySpec& activity,
                          std::vector<QueryEvent>& out, Timeline& timeline) {
    out.push_back(make_event(activity, EventKind::Started, activity.root_class,
                             activity.root_text, timeline));

    std::function<void(const StmtSpec&)> emit = [&](const StmtSpec& s) {
        out.push_back(
            make_event(activity, EventKind::Started, s.klass, s.text, timeline));
        for (const auto& child : s.children) emit(child);
        QueryEvent done =
            make_event(activity, EventKind::Completed, s.klass, {}, timeline);
        done.metadata.cpu_time_us = s.cpu_us;
        done.metadata.duration_us = s.duration_us;
        done.metadata.rows_returned = s.rows_returned;
        done.metadata.rows_inserted = s.rows_inserted;
        done.metadata.rows_updated = s.rows_updated;
        done.metadata.rows_deleted = s.rows_deleted;
        out.push_back(std::move(done));
    };
    for (const auto& s : activity.stmts) emit(s);

    QueryEvent done = make_event(activity, EventKind::Completed,
                                 activity.root_class, {}, timeline);
    done.metadata.cpu_time_us = 1000;
    done.metadata.duration_us = 2500;
    out.push_back(std::move(done));
}

// Interleaves per-client activity streams into one (ts, seq)-ordered log.
std::vector<QueryEvent> interleave(const std::vector<ActivitySpec>& activities,
                                   int clients, const GeneratorOptions& opts) {
    Timeline timeline(opts.start_ts, opts.seed);
    clients = std::max(1, clients);

    // Round-robin assignment; each client runs its activities in order.
    std::vector<std::vector<std::size_t>> queue(
        static_cast<std::size_t>(clients));
    for (std::size_t i = 0; i < activities.size(); ++i) {
        queue[i % clients].push_back(i);
    }

    struct ClientState {
        std::size_t next_activity{0};
        std::vector<QueryEvent> pending; // planned events of current activity
        std::size_t cursor{0};
    };
    std::vector<ClientState> state(static_cast<std::size_t>(clients));

    std::vector<QueryEvent> out;
    std::vector<std::size_t> active;
    for (std::size_t c = 0; c < queue.size(); ++c) {
        if (!queue[c].empty()) active.push_back(c);
    }

    // The plan for one activity is produced lazily when the client first
    // schedules it; timestamps are handed out at emission so streams
    // interleave while each activity stays strictly ordered.
    while (!active.empty()) {
        std::size_t pick = active[timeline.rng()() % active.size()];
        ClientState& cs = state[pick];
        if (cs.cursor >= cs.pending.size()) {
            cs.pending.clear();
            cs.cursor = 0;
            const std::size_t idx = queue[pick][cs.next_activity++];
            plan_activity_events(activities[idx], cs.pending, timeline);
        }
        out.push_back(std::move(cs.pending[cs.cursor++]));
        if (cs.cursor >= cs.pending.size() &&
            cs.next_activity >= queue[pick].size()) {
            active.erase(std::find(active.begin(), active.end(), pick));
        }
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------------
// Ground truth construction
// ---------------------------------------------------------------------

namespace {

struct TruthAgg {
    std::set<std::string> inputs;  // qualified names
    std::set<std::string> outputs;
    ColumnMapping columns;

    void absorb(const TruthAgg& other) {
        inputs.insert(other.inputs.begin(), other.inputs.end());
        outputs.insert(other.outputs.begin(), other.outputs.end());
        for (const auto& [out_col, in_cols] : other.columns) {
            auto& dst = columns[out_col];
            dst.insert(in_cols.begin(), in_cols.end());
        }
    }
};

class TruthBuilder {
public:
    TruthBuilder(GroundTruth& truth, bool full) : truth_(truth), full_(full) {}

    void add_activity(const ActivitySpec& activity) {
        ActivityTruth at;
        at.activity_id = activity.id;
        at.proc_key = activity.root_proc_key;

        const std::string conn_qn = connection_qualified_name(
            activity.meta.server_name, activity.meta.client_host,
            activity.meta.client_app_name, activity.meta.username);
        entity(conn_qn, EntityType::ClientConnection);

        // Root node "0".
        std::string root_run_qn = run_qualified_name(activity.id, "0");
        std::string root_static_qn;
        EntityType root_run_type;
        if (!activity.root_proc_key.empty()) {
            root_static_qn = static_query_qualified_name(truth_.database,
                                                         activity.root_proc_key);
            entity(root_static_qn, EntityType::StoredProcedure);
            root_run_type = EntityType::StoredProcedureRun;
        } else {
            root_static_qn = static_query_qualified_name(
                truth_.database,
                "h" + sql::statement_identity_hash(activity.root_text));
            entity(root_static_qn, EntityType::Batch);
            root_run_type = EntityType::BatchRun;
        }
        entity(root_run_qn, root_run_type);
        rel(RelationshipType::RunOf, root_run_qn, root_static_qn);
        rel(RelationshipType::ConnectionOf, root_run_qn, conn_qn);

        TruthAgg root_agg;
        std::size_t node_count = 1;
        for (std::size_t i = 0; i < activity.stmts.size(); ++i) {
            root_agg.absorb(walk(activity, activity.stmts[i],
                                 "0." + std::to_string(i), root_run_qn, conn_qn,
                                 node_count));
        }
        attach(root_run_qn, root_static_qn, root_agg);
        set_run_columns(root_run_qn, root_static_qn, root_agg.columns);

        at.node_count = node_count;
        at.root_inputs = root_agg.inputs;
        at.root_outputs = root_agg.outputs;
        at.trigger_ts = 0; // filled by the caller once events exist
        truth_.activities.push_back(std::move(at));
    }

    std::string relation_qn(const std::string& decl) const {
        if (decl.rfind("file:", 0) == 0) {
            return external_file_qualified_name(decl.substr(5));
        }
        auto dot = decl.find('.');
        return dataset_qualified_name(truth_.server, truth_.database,
                                      decl.substr(0, dot), decl.substr(dot + 1));
    }

private:
    GroundTruth& truth_;
    bool full_;

    void entity(const std::string& qn, EntityType type) {
        if (!full_) return;
        truth_.entities.emplace(qn, std::string(type_name(type)));
    }
    void rel(RelationshipType type, const std::string& from,
             const std::string& to) {
        if (!full_) return;
        truth_.relationships.insert(
            {std::string(relationship_name(type)), from, to});
    }
    void merge_columns(const std::string& qn, const ColumnMapping& cols) {
        if (!full_ || cols.empty()) return;
        auto& dst = truth_.column_mappings[qn];
        for (const auto& [out_col, in_cols] : cols) {
            dst[out_col].insert(in_cols.begin(), in_cols.end());
        }
    }
    void set_run_columns(const std::string& run_qn, const std::string& static_qn,
                         const ColumnMapping& rolled) {
        merge_columns(run_qn, rolled);
        merge_columns(static_qn, rolled);
    }

    void attach(const std::string& run_qn, const std::string& static_qn,
                const TruthAgg& agg) {
        if (!full_) return;
        for (const auto& in : agg.inputs) {
            rel(RelationshipType::Input, in, run_qn);
            rel(RelationshipType::Input, in, static_qn);
        }
        for (const auto& out : agg.outputs) {
            rel(RelationshipType::Output, run_qn, out);
            rel(RelationshipType::Output, static_qn, out);
        }
    }

    // Own statement lineage in qualified terms; creates dataset and
    // column entities.
    TruthAgg own_lineage(const StmtSpec& s) {
        TruthAgg agg;
        std::map<std::string, std::string> qn_by_decl;
        for (const auto& decl : s.in_tables) {
            const std::string qn = relation_qn(decl);
            qn_by_decl[decl] = qn;
            entity(qn, EntityType::Table);
            agg.inputs.insert(qn);
        }
        for (const auto& path : s.in_files) {
            const std::string qn = external_file_qualified_name(path);
            entity(qn, EntityType::ExternalFile);
            agg.inputs.insert(qn);
        }
        for (const auto& decl : s.out_tables) {
            const std::string qn = relation_qn(decl);
            qn_by_decl[decl] = qn;
            entity(qn, EntityType::Table);
            agg.outputs.insert(qn);
        }
        if (s.out_query_output) {
            const std::string qn = "qo://" + truth_.database + "/" +
                                   sql::statement_identity_hash(s.text);
            qn_by_decl["qo"] = qn;
            entity(qn, EntityType::QueryOutput);
            agg.outputs.insert(qn);
        }
        for (const auto& [out_col, in_cols] : s.colmap) {
            auto hash = out_col.rfind('#');
            auto it = qn_by_decl.find(out_col.substr(0, hash));
            if (it == qn_by_decl.end()) continue;
            const std::string out_qn =
                column_qualified_name(it->second, out_col.substr(hash + 1));
            entity(out_qn, EntityType::Column);
            rel(RelationshipType::ColumnOf, out_qn, it->second);
            auto& dst = agg.columns[out_qn];
            for (const auto& in_col : in_cols) {
                auto ihash = in_col.rfind('#');
                auto iit = qn_by_decl.find(in_col.substr(0, ihash));
                if (iit == qn_by_decl.end()) continue;
                const std::string in_qn =
                    column_qualified_name(iit->second, in_col.substr(ihash + 1));
                entity(in_qn, EntityType::Column);
                rel(RelationshipType::ColumnOf, in_qn, iit->second);
                dst.insert(in_qn);
            }
        }
        return agg;
    }

    TruthAgg walk(const ActivitySpec& activity, const StmtSpec& s,
                  const std::string& node_id, const std::string& parent_run_qn,
                  const std::string& conn_qn, std::size_t& node_count) {
        ++node_count;

        const std::string run_qn = run_qualified_name(activity.id, node_id);
        const std::string static_qn = static_query_qualified_name(
            truth_.database, "h" + sql::statement_identity_hash(s.text));
        EntityType static_type;
        EntityType run_type;
        switch (s.klass) {
        case EventClass::SqlBatch:
            static_type = EntityType::Batch;
            run_type = EntityType::BatchRun;
            break;
        case EventClass::SqlStatement:
            static_type = EntityType::AdhocStatement;
            run_type = EntityType::AdhocStatementRun;
            break;
        case EventClass::SpStatement:
        default:
            static_type = EntityType::SpStatement;
            run_type = EntityType::SpStatementRun;
            break;
        }
        entity(static_qn, static_type);
        entity(run_qn, run_type);
        rel(RelationshipType::RunOf, run_qn, static_qn);
        rel(RelationshipType::ConnectionOf, run_qn, conn_qn);
        rel(RelationshipType::SpawnedBy, run_qn, parent_run_qn);

        std::string attach_run_qn = run_qn;
        std::string proc_run_qn, proc_static_qn;
        if (!s.exec_proc_key.empty()) {
            proc_static_qn =
                static_query_qualified_name(truth_.database, s.exec_proc_key);
            proc_run_qn = run_qualified_name(activity.id, node_id + ".x");
            entity(proc_static_qn, EntityType::StoredProcedure);
            entity(proc_run_qn, EntityType::StoredProcedureRun);
            rel(RelationshipType::RunOf, proc_run_qn, proc_static_qn);
            rel(RelationshipType::ConnectionOf, proc_run_qn, conn_qn);
            rel(RelationshipType::SpawnedBy, proc_run_qn, run_qn);
            attach_run_qn = proc_run_qn;
        }

        TruthAgg agg = own_lineage(s);
        for (std::size_t i = 0; i < s.children.size(); ++i) {
            agg.absorb(walk(activity, s.children[i],
                            node_id + "." + std::to_string(i), attach_run_qn,
                            conn_qn, node_count));
        }

        attach(run_qn, static_qn, agg);
        set_run_columns(run_qn, static_qn, agg.columns);
        if (!proc_run_qn.empty()) {
            attach(proc_run_qn, proc_static_qn, agg);
            set_run_columns(proc_run_qn, proc_static_qn, agg.columns);
        }
        return agg;
    }
};

void finalize_truth(GroundTruth& truth, const std::vector<ActivitySpec>& specs,
                    const std::vector<QueryEvent>& events) {
    truth.total_events = events.size();
    std::map<std::string, std::int64_t> trigger;
    for (const auto& e : events) {
        if (!trigger.count(e.activity_id)) trigger[e.activity_id] = e.ts;
    }
    for (auto& at : truth.activities) {
        auto it = trigger.find(at.activity_id);
        if (it != trigger.end()) at.trigger_ts = it->second;
    }
    (void)specs;
}

GroundTruth build_truth(const std::vector<ActivitySpec>& specs,
                        const GeneratorOptions& opts,
                        const std::string& database) {
    GroundTruth truth;
    truth.server = opts.server;
    truth.database = database;
    const bool full =
        opts.force_full_truth || specs.size() <= opts.full_truth_limit;
    truth.full_graph = full;
    TruthBuilder builder(truth, full);
    for (const auto& spec : specs) builder.add_activity(spec);
    return truth;
}

// ---------------------------------------------------------------------
// Running example workload
// ---------------------------------------------------------------------

EventMetadata sales_metadata(const GeneratorOptions& opts,
                             const std::string& database) {
    EventMetadata m;
    m.username = "etl";
    m.client_app_name = "sqlcmd";
    m.client_host = "wks1";
    m.server_name = opts.server;
    m.database_name = database;
    return m;
}

ActivitySpec running_example_activity(const std::string& id, int version,
                                      const EventMetadata& meta) {
    ActivitySpec a;
    a.id = id;
    a.root_text = "EXECUTE SyncNewSales " + std::to_string(version);
    a.root_class = EventClass::SqlBatch;
    a.root_proc_key = "dbo.syncnewsales";
    a.root_proc_display = "SyncNewSales";
    a.meta = meta;

    StmtSpec clear;
    clear.text =
        "IF EXISTS(SELECT * FROM INFORMATION_SCHEMA.TABLES WHERE "
        "TABLE_NAME='StagedSales') DELETE FROM TABLE StagedSales;";
    clear.out_tables = {"dbo.stagedsales"};
    clear.rows_deleted = 1200;

    StmtSpec load;
    load.text = "BULK INSERT StagedSales FROM 'newSales.csv';";
    load.in_files = {"newSales.csv"};
    load.out_tables = {"dbo.stagedsales"};
    load.rows_inserted = 1500;

    StmtSpec call;
    call.text = "EXECUTE CleanAndAppendSalesHistory @trackingSystemVersion;";
    call.exec_proc_key = "dbo.cleanandappendsaleshistory";
    call.exec_proc_display = "CleanAndAppendSalesHistory";

    StmtSpec append;
    if (version == 1) {
        append.text =
            "INSERT SalesHistory SELECT c.CustomerId, c.Region, r.Rate * "
            "c.Amount AS Amount FROM StagedSales c JOIN ConversionRate r ON "
            "c.Region = r.Region";
        append.in_tables = {"dbo.stagedsales", "dbo.conversionrate"};
        append.out_tables = {"dbo.saleshistory"};
        append.colmap["dbo.saleshistory#customerid"] = {
            "dbo.stagedsales#customerid"};
        append.colmap["dbo.saleshistory#region"] = {"dbo.stagedsales#region"};
        append.colmap["dbo.saleshistory#amount"] = {"dbo.conversionrate#rate",
                                                    "dbo.stagedsales#amount"};
    } else {
        append.text = "INSERT SalesHistory SELECT * FROM StagedSales";
        append.in_tables = {"dbo.stagedsales"};
        append.out_tables = {"dbo.saleshistory"};
        // no catalog: the star cannot be expanded, columns fall back
    }
    append.rows_inserted = 1500;
    call.children.push_back(std::move(append));

    a.stmts.push_back(std::move(clear));
    a.stmts.push_back(std::move(load));
    a.stmts.push_back(std::move(call));
    return a;
}

} // namespace

GeneratedWorkload gen_running_example(const RunningExampleParams& params,
                                      const GeneratorOptions& opts) {
    if (params.repeats < 1) throw ConfigError("repeats must be >= 1");
    if (params.version != 1 && params.version != 2) {
        throw ConfigError("version must be 1 or 2");
    }
    const std::string database =
        opts.database.empty() ? "salesdb" : opts.database;
    EventMetadata meta = sales_metadata(opts, database);

    std::vector<ActivitySpec> specs;
    specs.reserve(params.repeats);
    for (int i = 0; i < params.repeats; ++i) {
        specs.push_back(running_example_activity(std::to_string(i + 1),
                                                 params.version, meta));
    }

    GeneratedWorkload out;
    out.events = interleave(specs, /*clients=*/1, opts);
    out.truth = build_truth(specs, opts, database);
    finalize_truth(out.truth, specs, out.events);
    return out;
}

// ---------------------------------------------------------------------
// OLTP workload
// ---------------------------------------------------------------------

namespace {

struct TableDef {
    const char* name;
    std::vector<const char*> columns;
};

const std::vector<TableDef>& oltp_schema() {
    static const std::vector<TableDef> tables = {
        {"warehouse", {"w_id", "w_name", "w_tax", "w_ytd"}},
        {"district", {"d_id", "d_w_id", "d_tax", "d_next_o_id", "d_ytd"}},
        {"customer",
         {"c_id", "c_d_id", "c_w_id", "c_balance", "c_discount", "c_credit",
          "c_ytd_payment"}},
        {"orders",
         {"o_id", "o_d_id", "o_w_id", "o_c_id", "o_entry_d", "o_carrier_id",
          "o_ol_cnt"}},
        {"new_orders", {"no_o_id", "no_d_id", "no_w_id"}},
        {"order_line",
         {"ol_o_id", "ol_d_id", "ol_w_id", "ol_number", "ol_i_id", "ol_qty",
          "ol_amount", "ol_delivery_d"}},
        {"item", {"i_id", "i_name", "i_price", "i_data"}},
        {"stock", {"s_i_id", "s_w_id", "s_qty", "s_ytd", "s_order_cnt"}},
        {"history", {"h_c_id", "h_d_id", "h_w_id", "h_date", "h_amount"}},
    };
    return tables;
}

std::string proc_name(int index) {
    static const char* kNames[] = {"new_order", "payment", "delivery",
                                   "order_status", "stock_level"};
    if (index < 5) return kNames[index];
    return "proc_" + std::to_string(index + 1);
}

class OltpBuilder {
public:
    OltpBuilder(const OltpParams& params, const GeneratorOptions& opts,
                std::string database)
        : params_(params), opts_(opts), database_(std::move(database)),
          rng_(opts.seed ^ 0x9e3779b97f4a7c15ull) {}

    std::vector<ActivitySpec> build() {
        std::vector<ActivitySpec> specs;
        if (params_.schema_setup) specs.push_back(schema_setup_activity());
        for (int t = 0; t < params_.transactions; ++t) {
            specs.push_back(transaction_activity(t));
        }
        return specs;
    }

private:
    const OltpParams& params_;
    const GeneratorOptions& opts_;
    std::string database_;
    std::mt19937_64 rng_;

    std::int64_t lit() { return static_cast<std::int64_t>(rng_() % 90000 + 1); }

    EventMetadata client_meta(int client) const {
        EventMetadata m;
        m.username = "app_user";
        m.client_app_name = "oltp_bench";
        m.client_host = "wks" + std::to_string(client + 1);
        m.server_name = opts_.server;
        m.database_name = database_;
        return m;
    }

    ActivitySpec schema_setup_activity() {
        ActivitySpec a;
        a.id = "setup";
        a.root_class = EventClass::SqlBatch;
        a.meta = client_meta(0);

        std::string script;
        for (const auto& table : oltp_schema()) {
            std::string stmt = "CREATE TABLE ";
            stmt += table.name;
            stmt += " (";
            for (std::size_t i = 0; i < table.columns.size(); ++i) {
                if (i > 0) stmt += ", ";
                stmt += table.columns[i];
                stmt += " int";
            }
            stmt += ")";

            StmtSpec s;
            s.text = stmt;
            s.klass = EventClass::SqlStatement;
            s.out_tables = {std::string("dbo.") + table.name};
            s.duration_us = 900;
            s.cpu_us = 300;
            a.stmts.push_back(std::move(s));
            script += stmt + ";\n";
        }
        a.root_text = script;
        return a;
    }

    StmtSpec select_stmt(std::string text, std::string table,
                         std::map<std::string, std::set<std::string>> colmap) {
        StmtSpec s;
        s.text = std::move(text);
        s.in_tables = {std::move(table)};
        s.out_query_output = true;
        s.colmap = std::move(colmap);
        s.rows_returned = static_cast<std::int64_t>(rng_() % 40 + 1);
        s.duration_us = static_cast<std::int64_t>(rng_() % 900 + 80);
        s.cpu_us = s.duration_us / 2;
        return s;
    }

    StmtSpec update_stmt(std::string text, std::string table) {
        StmtSpec s;
        s.text = std::move(text);
        s.out_tables = {std::move(table)};
        s.rows_updated = 1;
        s.duration_us = static_cast<std::int64_t>(rng_() % 1200 + 120);
        s.cpu_us = s.duration_us / 2;
        return s;
    }

    StmtSpec insert_stmt(std::string text, std::string table) {
        StmtSpec s;
        s.text = std::move(text);
        s.out_tables = {std::move(table)};
        s.rows_inserted = 1;
        s.duration_us = static_cast<std::int64_t>(rng_() % 700 + 100);
        s.cpu_us = s.duration_us / 2;
        return s;
    }

    std::vector<StmtSpec> prologue(int proc_idx) {
        std::vector<StmtSpec> out;
        const auto w = std::to_string(lit());
        const auto d = std::to_string(lit());
        const auto c = std::to_string(lit());
        switch (proc_idx % 5) {
        case 0: // new_order
            out.push_back(select_stmt(
                "SELECT w_tax FROM warehouse WHERE w_id = " + w, "dbo.warehouse",
                {{"qo#w_tax", {"dbo.warehouse#w_tax"}}}));
            out.push_back(select_stmt(
                "SELECT d_tax, d_next_o_id FROM district WHERE d_w_id = " + w +
                    " AND d_id = " + d,
                "dbo.district",
                {{"qo#d_tax", {"dbo.district#d_tax"}},
                 {"qo#d_next_o_id", {"dbo.district#d_next_o_id"}}}));
            out.push_back(update_stmt(
                "UPDATE district SET d_next_o_id = d_next_o_id + 1 WHERE "
                "d_w_id = " + w + " AND d_id = " + d,
                "dbo.district"));
            out.push_back(select_stmt(
                "SELECT c_discount, c_credit FROM customer WHERE c_w_id = " + w +
                    " AND c_id = " + c,
                "dbo.customer",
                {{"qo#c_discount", {"dbo.customer#c_discount"}},
                 {"qo#c_credit", {"dbo.customer#c_credit"}}}));
            out.push_back(insert_stmt(
                "INSERT INTO orders (o_id, o_d_id, o_w_id, o_c_id, o_ol_cnt) "
                "VALUES (" + std::to_string(lit()) + ", " + d + ", " + w + ", " +
                    c + ", " + std::to_string(params_.loop_iters) + ")",
                "dbo.orders"));
            out.push_back(insert_stmt(
                "INSERT INTO new_orders (no_o_id, no_d_id, no_w_id) VALUES (" +
                    std::to_string(lit()) + ", " + d + ", " + w + ")",
                "dbo.new_orders"));
            break;
        case 1: // payment
            out.push_back(update_stmt(
                "UPDATE warehouse SET w_ytd = w_ytd + " + std::to_string(lit()) +
                    " WHERE w_id = " + w,
                "dbo.warehouse"));
            out.push_back(select_stmt(
                "SELECT w_name FROM warehouse WHERE w_id = " + w, "dbo.warehouse",
                {{"qo#w_name", {"dbo.warehouse#w_name"}}}));
            out.push_back(update_stmt(
                "UPDATE district SET d_ytd = d_ytd + " + std::to_string(lit()) +
                    " WHERE d_w_id = " + w + " AND d_id = " + d,
                "dbo.district"));
            out.push_back(select_stmt(
                "SELECT c_balance, c_credit FROM customer WHERE c_id = " + c,
                "dbo.customer",
                {{"qo#c_balance", {"dbo.customer#c_balance"}},
                 {"qo#c_credit", {"dbo.customer#c_credit"}}}));
            out.push_back(update_stmt(
                "UPDATE customer SET c_balance = c_balance - " +
                    std::to_string(lit()) + ", c_ytd_payment = c_ytd_payment + " +
                    std::to_string(lit()) + " WHERE c_id = " + c,
                "dbo.customer"));
            out.push_back(insert_stmt(
                "INSERT INTO history (h_c_id, h_d_id, h_w_id, h_date, h_amount) "
                "VALUES (" + c + ", " + d + ", " + w + ", " +
                    std::to_string(lit()) + ", " + std::to_string(lit()) + ")",
                "dbo.history"));
            break;
        case 2: // delivery
            out.push_back(select_stmt(
                "SELECT no_o_id FROM new_orders WHERE no_d_id = " + d +
                    " AND no_w_id = " + w,
                "dbo.new_orders", {{"qo#no_o_id", {"dbo.new_orders#no_o_id"}}}));
            {
                StmtSpec del;
                del.text = "DELETE FROM new_orders WHERE no_o_id = " +
                           std::to_string(lit()) + " AND no_d_id = " + d +
                           " AND no_w_id = " + w;
                del.out_tables = {"dbo.new_orders"};
                del.rows_deleted = 1;
                del.duration_us = static_cast<std::int64_t>(rng_() % 600 + 90);
                del.cpu_us = del.duration_us / 2;
                out.push_back(std::move(del));
            }
            out.push_back(update_stmt(
                "UPDATE orders SET o_carrier_id = " + std::to_string(lit()) +
                    " WHERE o_id = " + std::to_string(lit()),
                "dbo.orders"));
            out.push_back(update_stmt(
                "UPDATE order_line SET ol_delivery_d = " + std::to_string(lit()) +
                    " WHERE ol_o_id = " + std::to_string(lit()),
                "dbo.order_line"));
            out.push_back(select_stmt(
                "SELECT SUM(ol_amount) AS total FROM order_line WHERE ol_o_id = " +
                    std::to_string(lit()),
                "dbo.order_line", {{"qo#total", {"dbo.order_line#ol_amount"}}}));
            out.push_back(update_stmt(
                "UPDATE customer SET c_balance = c_balance + " +
                    std::to_string(lit()) + " WHERE c_id = " + c,
                "dbo.customer"));
            break;
        case 3: // order_status
            out.push_back(select_stmt(
                "SELECT c_balance FROM customer WHERE c_id = " + c,
                "dbo.customer", {{"qo#c_balance", {"dbo.customer#c_balance"}}}));
            out.push_back(select_stmt(
                "SELECT o_id, o_carrier_id FROM orders WHERE o_c_id = " + c,
                "dbo.orders",
                {{"qo#o_id", {"dbo.orders#o_id"}},
                 {"qo#o_carrier_id", {"dbo.orders#o_carrier_id"}}}));
            out.push_back(select_stmt(
                "SELECT ol_i_id, ol_qty, ol_amount FROM order_line WHERE "
                "ol_o_id = " + std::to_string(lit()),
                "dbo.order_line",
                {{"qo#ol_i_id", {"dbo.order_line#ol_i_id"}},
                 {"qo#ol_qty", {"dbo.order_line#ol_qty"}},
                 {"qo#ol_amount", {"dbo.order_line#ol_amount"}}}));
            break;
        case 4: // stock_level
        default:
            out.push_back(select_stmt(
                "SELECT d_next_o_id FROM district WHERE d_w_id = " + w +
                    " AND d_id = " + d,
                "dbo.district",
                {{"qo#d_next_o_id", {"dbo.district#d_next_o_id"}}}));
            {
                StmtSpec s;
                s.text = "SELECT COUNT(s_i_id) AS low_stock FROM stock JOIN "
                         "order_line ON ol_i_id = s_i_id WHERE s_qty < " +
                         std::to_string(lit());
                s.in_tables = {"dbo.stock", "dbo.order_line"};
                s.out_query_output = true;
                s.colmap = {{"qo#low_stock", {"dbo.stock#s_i_id"}}};
                s.rows_returned = 1;
                s.duration_us = static_cast<std::int64_t>(rng_() % 2000 + 300);
                s.cpu_us = s.duration_us / 2;
                out.push_back(std::move(s));
            }
            break;
        }
        return out;
    }

    // Aux procedures give deeper nesting; chain length grows with the
    // procedure index, capped so trees stay within six levels.
    StmtSpec chain_stmt(int proc_idx, int depth_left) {
        StmtSpec exec;
        const std::string aux =
            proc_name(proc_idx) + "_aux" + std::to_string(depth_left);
        exec.text = "EXECUTE " + aux + " @arg = " + std::to_string(lit());
        exec.exec_proc_key = "dbo." + aux;
        exec.exec_proc_display = aux;
        exec.duration_us = 1500;
        exec.cpu_us = 500;

        exec.children.push_back(select_stmt(
            "SELECT w_ytd AS s" + std::to_string(depth_left) +
                " FROM warehouse WHERE w_id = " + std::to_string(lit()),
            "dbo.warehouse",
            {{"qo#s" + std::to_string(depth_left), {"dbo.warehouse#w_ytd"}}}));
        exec.children.push_back(update_stmt(
            "UPDATE district SET d_ytd = d_ytd + " + std::to_string(lit()) +
                " WHERE d_id = " + std::to_string(lit()),
            "dbo.district"));
        if (depth_left > 1) {
            exec.children.push_back(chain_stmt(proc_idx, depth_left - 1));
        }
        return exec;
    }

    std::vector<StmtSpec> loop_body(int body_len) {
        // A fixed cycle of templates; literals differ per iteration but
        // normalize away.
        std::vector<StmtSpec> body;
        for (int j = 0; j < body_len; ++j) {
            switch (j % 3) {
            case 0:
                body.push_back(select_stmt(
                    "SELECT i_price, i_name FROM item WHERE i_id = " +
                        std::to_string(lit()),
                    "dbo.item",
                    {{"qo#i_price", {"dbo.item#i_price"}},
                     {"qo#i_name", {"dbo.item#i_name"}}}));
                break;
            case 1:
                body.push_back(update_stmt(
                    "UPDATE stock SET s_qty = s_qty - " + std::to_string(lit()) +
                        ", s_ytd = s_ytd + " + std::to_string(lit()) +
                        " WHERE s_i_id = " + std::to_string(lit()) +
                        " AND s_w_id = " + std::to_string(lit()),
                    "dbo.stock"));
                break;
            case 2:
            default:
                body.push_back(insert_stmt(
                    "INSERT INTO order_line (ol_o_id, ol_d_id, ol_w_id, "
                    "ol_number, ol_i_id, ol_qty, ol_amount) VALUES (" +
                        std::to_string(lit()) + ", " + std::to_string(lit()) +
                        ", " + std::to_string(lit()) + ", " +
                        std::to_string(lit()) + ", " + std::to_string(lit()) +
                        ", " + std::to_string(lit()) + ", " +
                        std::to_string(lit()) + ")",
                    "dbo.order_line"));
                break;
            }
        }
        return body;
    }

    StmtSpec epilogue_stmt(int index) {
        // Index-bearing aliases keep epilogue filler aperiodic so it never
        // looks like a loop.
        const auto& tables = oltp_schema();
        const TableDef& table = tables[index % tables.size()];
        const std::string col = table.columns[1 + (index % (table.columns.size() - 1))];
        const std::string alias = "f" + std::to_string(index);
        return select_stmt(
            "SELECT " + col + " AS " + alias + " FROM " + table.name +
                " WHERE " + std::string(table.columns[0]) + " = " +
                std::to_string(lit()),
            std::string("dbo.") + table.name,
            {{"qo#" + alias, {std::string("dbo.") + table.name + "#" + col}}});
    }

    ActivitySpec transaction_activity(int tx) {
        const int proc_idx = tx % std::max(1, params_.sp_count);
        const int client = tx % std::max(1, params_.clients);
        const std::string proc = proc_name(proc_idx);

        ActivitySpec a;
        a.id = "t" + std::to_string(tx + 1);
        a.root_text = "EXEC " + proc + " @w_id = " + std::to_string(lit()) +
                      ", @d_id = " + std::to_string(lit());
        a.root_class = EventClass::SqlBatch;
        a.root_proc_key = "dbo." + proc;
        a.root_proc_display = proc;
        a.meta = client_meta(client);

        a.stmts = prologue(proc_idx);

        const int chain_len = proc_idx % 5;
        std::size_t chain_total = 0;
        if (chain_len > 0) {
            StmtSpec chain = chain_stmt(proc_idx, chain_len);
            chain_total = 1 + stmt_count(chain.children);
            a.stmts.push_back(std::move(chain));
        }

        const int loop_iters = std::max(1, params_.loop_iters);
        const std::size_t fixed = stmt_count(a.stmts);
        std::size_t budget = static_cast<std::size_t>(
            std::max<int>(params_.stmts_per_tx, static_cast<int>(fixed) + 3));
        std::size_t remaining = budget - fixed;
        int body_len = static_cast<int>(
            std::clamp<std::size_t>(remaining / loop_iters, 1, 24));
        for (int it = 0; it < loop_iters; ++it) {
            for (auto& s : loop_body(body_len)) a.stmts.push_back(std::move(s));
        }
        std::size_t used = fixed + static_cast<std::size_t>(body_len) * loop_iters;
        int filler = 0;
        while (used < budget) {
            a.stmts.push_back(epilogue_stmt(filler++));
            ++used;
        }
        (void)chain_total;
        return a;
    }
};

} // namespace

GeneratedWorkload gen_oltp(const OltpParams& params,
                           const GeneratorOptions& opts) {
    if (params.transactions < 1 || params.clients < 1 || params.sp_count < 1 ||
        params.loop_iters < 1 || params.stmts_per_tx < 1) {
        throw ConfigError("all workload parameters must be >= 1");
    }
    const std::string database = opts.database.empty() ? "tpcc" : opts.database;
    OltpBuilder builder(params, opts, database);
    std::vector<ActivitySpec> specs = builder.build();

    GeneratedWorkload out;
    out.events = interleave(specs, params.clients, opts);
    out.truth = build_truth(specs, opts, database);
    finalize_truth(out.truth, specs, out.events);
    return out;
}

// ---------------------------------------------------------------------
// Plan variant
// ---------------------------------------------------------------------

std::vector<QueryEvent> gen_plan_variant(const std::vector<QueryEvent>& events,
                                         const PlanVariantParams& params,
                                         std::uint64_t seed) {
    if (params.bytes_factor <= 0) {
        throw ConfigError("plan bytes factor must be positive");
    }
    const double fraction = std::clamp(params.events_fraction, 0.0, 1.0);

    std::uint64_t total_bytes = 0;
    std::size_t candidates = 0;
    for (const auto& e : events) {
        total_bytes += serialize_event(e).size() + 1;
        if (e.kind == EventKind::Completed &&
            e.klass != EventClass::SqlBatch)
            ++candidates;
    }
    const std::size_t plan_events = static_cast<std::size_t>(
        static_cast<double>(candidates) * fraction + 0.5);
    if (plan_events == 0) return events;

    const std::uint64_t payload_bytes = static_cast<std::uint64_t>(
        params.bytes_factor * static_cast<double>(total_bytes) /
        static_cast<double>(plan_events));

    std::mt19937_64 rng(seed ^ 0xabcdef1234567890ull);
    static const char kPlanChars[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_<>/= ";

    std::vector<QueryEvent> out;
    out.reserve(events.size() + plan_events);
    std::size_t seen = 0, emitted = 0;
    std::uint64_t seq = 0;
    for (const auto& e : events) {
        QueryEvent copy = e;
        copy.seq = seq++;
        const bool is_candidate = e.kind == EventKind::Completed &&
                                  e.klass != EventClass::SqlBatch;
        out.push_back(std::move(copy));
        if (!is_candidate) continue;
        ++seen;
        // Evenly spread plan emissions across candidates.
        const std::size_t want = (seen * plan_events) / candidates;
        if (want <= emitted) continue;
        ++emitted;

        QueryEvent plan;
        plan.activity_id = e.activity_id;
        plan.ts = e.ts; // same instant; seq breaks the tie
        plan.seq = seq++;
        plan.kind = EventKind::Completed;
        plan.klass = e.klass;
        plan.metadata = e.metadata;
        plan.metadata.cpu_time_us = 0;
        plan.metadata.duration_us = 0;
        std::string payload;
        payload.reserve(payload_bytes);
        for (std::uint64_t i = 0; i < payload_bytes; ++i) {
            payload.push_back(kPlanChars[rng() % (sizeof(kPlanChars) - 1)]);
        }
        plan.plan_payload = std::move(payload);
        out.push_back(std::move(plan));
    }
    return out;
}

std::uint64_t log_bytes(const std::vector<QueryEvent>& events) {
    std::uint64_t total = 0;
    for (const auto& e : events) total += serialize_event(e).size() + 1;
    return total;
}

void write_log(const std::vector<QueryEvent>& events,
               const std::filesystem::path& dir, int events_per_file) {
    std::filesystem::create_directories(dir);
    if (events_per_file < 1) events_per_file = 100000;

    std::ofstream out;
    int partition = 0;
    int in_file = 0;
    for (const auto& e : events) {
        if (!out.is_open() || in_file >= events_per_file) {
            if (out.is_open()) out.close();
            out.open(dir / log_file_name(partition++, e.seq), std::ios::trunc);
            if (!out) throw SourceUnavailable("cannot write log under " +
                                              dir.string());
            in_file = 0;
        }
        out << serialize_event(e) << "\n";
        ++in_file;
    }
}

// ---------------------------------------------------------------------
// Ground truth serialization and comparison
// ---------------------------------------------------------------------

std::string GroundTruth::to_json() const {
    json j;
    j["server"] = server;
    j["database"] = database;
    j["total_events"] = total_events;
    j["full_graph"] = full_graph;

    json acts = json::array();
    for (const auto& a : activities) {
        json entry;
        entry["activity_id"] = a.activity_id;
        entry["proc"] = a.proc_key;
        entry["trigger_ts"] = a.trigger_ts;
        entry["node_count"] = a.node_count;
        entry["root_inputs"] = a.root_inputs;
        entry["root_outputs"] = a.root_outputs;
        acts.push_back(std::move(entry));
    }
    j["activities"] = std::move(acts);

    if (full_graph) {
        j["entities"] = entities;
        json rels = json::array();
        for (const auto& r : relationships) {
            rels.push_back(json::array({r[0], r[1], r[2]}));
        }
        j["relationships"] = std::move(rels);
        json maps = json::object();
        for (const auto& [qn, mapping] : column_mappings) {
            json m = json::object();
            for (const auto& [out_col, in_cols] : mapping) m[out_col] = in_cols;
            maps[qn] = std::move(m);
        }
        j["column_mappings"] = std::move(maps);
    }
    return j.dump();
}

GroundTruth GroundTruth::from_json(const std::string& text) {
    json j = json::parse(text);
    GroundTruth t;
    t.server = j.value("server", "");
    t.database = j.value("database", "");
    t.total_events = j.value("total_events", 0ull);
    t.full_graph = j.value("full_graph", false);
    for (const auto& entry : j["activities"]) {
        ActivityTruth a;
        a.activity_id = entry.value("activity_id", "");
        a.proc_key = entry.value("proc", "");
        a.trigger_ts = entry.value("trigger_ts", 0ll);
        a.node_count = entry.value("node_count", 0ull);
        for (const auto& qn : entry["root_inputs"])
            a.root_inputs.insert(qn.get<std::string>());
        for (const auto& qn : entry["root_outputs"])
            a.root_outputs.insert(qn.get<std::string>());
        t.activities.push_back(std::move(a));
    }
    if (t.full_graph) {
        for (const auto& [qn, type] : j["entities"].items()) {
            t.entities[qn] = type.get<std::string>();
        }
        for (const auto& r : j["relationships"]) {
            t.relationships.insert({r[0].get<std::string>(),
                                    r[1].get<std::string>(),
                                    r[2].get<std::string>()});
        }
        for (const auto& [qn, mapping] : j["column_mappings"].items()) {
            ColumnMapping m;
            for (const auto& [out_col, in_cols] : mapping.items()) {
                for (const auto& col : in_cols) m[out_col].insert(col.get<std::string>());
            }
            t.column_mappings[qn] = std::move(m);
        }
    }
    return t;
}

void GroundTruth::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw SourceUnavailable("cannot write ground truth: " + path.string());
    out << to_json() << "\n";
}

GroundTruth GroundTruth::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SourceUnavailable("cannot read ground truth: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

std::vector<std::string> GroundTruth::diff(const ProvenanceGraph& g) const {
    std::vector<std::string> issues;
    if (!full_graph) {
        issues.push_back("ground truth does not carry the full expected graph");
        return issues;
    }

    std::map<std::string, std::string> got_entities;
    std::map<std::string, const Entity*> by_qn;
    for (const auto& [guid, entity] : g.entities) {
        got_entities[entity.qualified_name] = std::string(type_name(entity.type));
        by_qn[entity.qualified_name] = &entity;
    }
    for (const auto& [qn, type] : entities) {
        auto it = got_entities.find(qn);
        if (it == got_entities.end()) {
            issues.push_back("missing entity: " + qn);
        } else if (it->second != type) {
            issues.push_back("entity type mismatch at " + qn + ": expected " +
                             type + ", got " + it->second);
        }
    }
    for (const auto& [qn, type] : got_entities) {
        if (!entities.count(qn)) issues.push_back("unexpected entity: " + qn);
    }

    std::set<std::array<std::string, 3>> got_rels;
    for (const auto& rel : g.relationships) {
        const Entity* from = g.find(rel.from);
        const Entity* to = g.find(rel.to);
        got_rels.insert({std::string(relationship_name(rel.type)),
                         from ? from->qualified_name : "?",
                         to ? to->qualified_name : "?"});
    }
    for (const auto& r : relationships) {
        if (!got_rels.count(r)) {
            issues.push_back("missing relationship: " + r[0] + " " + r[1] +
                             " -> " + r[2]);
        }
    }
    for (const auto& r : got_rels) {
        if (!relationships.count(r)) {
            issues.push_back("unexpected relationship: " + r[0] + " " + r[1] +
                             " -> " + r[2]);
        }
    }

    for (const auto& [qn, expected_map] : column_mappings) {
        auto it = by_qn.find(qn);
        if (it == by_qn.end()) continue; // already reported
        const Entity* e = it->second;
        if (!e->column_mapping) {
            issues.push_back("missing column mapping on " + qn);
            continue;
        }
        if (*e->column_mapping != expected_map) {
            issues.push_back("column mapping mismatch on " + qn);
        }
    }
    for (const auto& [qn, e] : by_qn) {
        if (e->column_mapping && !e->column_mapping->empty() &&
            !column_mappings.count(qn)) {
            issues.push_back("unexpected column mapping on " + qn);
        }
    }
    return issues;
}

} // namespace provtrace
