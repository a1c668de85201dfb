// SPDX-License-Identifier: Apache-2.0
#include "agentlab/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

namespace agentlab
{

namespace
{

constexpr int client_count = 60;
constexpr int fund_count = 30;
constexpr int world_year = 2026;

std::uint64_t world_hash(std::string_view entity, std::string_view facet)
{
    auto key = std::string(entity);
    key += '#';
    key += facet;
    return mix_seed(fnv1a(key));
}

std::string code(char prefix, int number)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%c%03d", prefix, number);
    return buf;
}

bool entity_exists(const std::string& id, char prefix, int count)
{
    if (id.size() != 4 || id[0] != prefix)
        return false;
    if (!std::all_of(id.begin() + 1, id.end(), [](char c) { return c >= '0' && c <= '9'; }))
        return false;
    auto const n = std::stoi(id.substr(1));
    return n >= 1 && n <= count;
}

bool date_exists(const std::string& date)
{
    return date.size() == 10 && date.substr(0, 4) == std::to_string(world_year);
}

std::string fixed(double value, int decimals)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    return buf;
}

std::string money(std::int64_t thousands)
{
    if (thousands >= 1000 && thousands % 1000 == 0)
        return "$" + std::to_string(thousands / 1000) + "M";
    return "$" + std::to_string(thousands) + "K";
}

std::vector<std::string> holdings_of(const std::string& client)
{
    auto funds = std::vector<std::string> {};
    for (int k = 0; funds.size() < 3; ++k)
    {
        auto f = code('F', 1 + static_cast<int>(world_hash(client, "holding" + std::to_string(k)) % fund_count));
        if (std::find(funds.begin(), funds.end(), f) == funds.end())
            funds.push_back(f);
    }
    std::sort(funds.begin(), funds.end());
    return funds;
}

std::string risk_of_client(const std::string& client)
{
    return (world_hash(client, "risk") >> 9) & 1 ? "high" : "low";
}

std::string cash_signal(const std::string& client)
{
    return (world_hash(client, "cash") >> 5) & 1 ? "low" : "ample";
}

std::int64_t cash_amount(const std::string& client)
{
    auto const h = world_hash(client, "cash-amount");
    return cash_signal(client) == "low" ? 5 + static_cast<std::int64_t>(h % 16) : 100 + 10 * static_cast<std::int64_t>(h % 40);
}

std::string fund_risk(const std::string& fund)
{
    static const char* levels[] = { "low", "medium", "high" };
    return levels[world_hash(fund, "risk") % 3];
}

double fund_nav(const std::string& fund, const std::string& date)
{
    return 1.0 + static_cast<double>(world_hash(fund + date, "nav") % 2000) / 1000.0;
}

double fund_return(const std::string& fund, const std::string& period)
{
    return -5.0 + static_cast<double>(world_hash(fund + period, "return") % 200) / 10.0;
}

double index_level(const std::string& index, const std::string& date)
{
    return 2000.0 + static_cast<double>(world_hash(index + date, "level") % 20000) / 10.0;
}

std::vector<std::int64_t> redemption_amounts(const std::string& client)
{
    auto const h = world_hash(client, "redemptions");
    auto out = std::vector<std::int64_t> { 50 * (1 + static_cast<std::int64_t>(h % 12)) };
    if ((h >> 8) % 3 == 0)
        out.push_back(50 * (1 + static_cast<std::int64_t>((h >> 16) % 6)));
    return out;
}

int transaction_count(const std::string& client)
{
    return 1 + static_cast<int>(world_hash(client, "transactions") % 3);
}

int note_count(const std::string& client)
{
    return 1 + static_cast<int>(world_hash(client, "notes") % 3);
}

std::vector<std::string> products_in(const std::string& category)
{
    auto const n = 2 + static_cast<int>(world_hash(category, "catalog") % 4);
    auto out = std::vector<std::string> {};
    for (int i = 1; i <= n; ++i)
        out.push_back(category + "-" + std::to_string(i));
    return out;
}

bool suitable(const std::string& client, const std::string& fund)
{
    return risk_of_client(client) == "high" || fund_risk(fund) != "high";
}

std::string headline(const std::string& topic)
{
    static const char* heads[] = { "central bank holds rates steady", "bond yields edge lower", "export data beats forecasts",
                                   "tech shares lead the session" };
    return heads[world_hash(topic, "headline") % 4];
}

std::string str(const ParamMap& p, const std::string& key)
{
    auto it = p.find(key);
    if (it == p.end() || !it->second.is_string())
        return {};
    return it->second.get<std::string>();
}

std::string join_and(const std::vector<std::string>& items)
{
    if (items.empty())
        return "";
    if (items.size() == 1)
        return items.front();
    auto out = std::string {};
    for (std::size_t i = 0; i + 1 < items.size(); ++i)
        out += (i == 0 ? "" : ", ") + items[i];
    return out + " and " + items.back();
}

std::string count_text(std::size_t n, const std::string& noun)
{
    static const char* words[] = { "no", "one", "two", "three", "four", "five", "six" };
    auto const word = n < 7 ? std::string(words[n]) : std::to_string(n);
    return word + " " + noun + (n == 1 ? "" : "s");
}

} // namespace

std::optional<Json> world_payload(const std::string& tool, const ParamMap& params)
{
    auto const client = str(params, "client_id");
    auto const fund = str(params, "fund_code");
    auto const date = str(params, "date");
    auto const client_ok = entity_exists(client, 'C', client_count);
    auto const fund_ok = entity_exists(fund, 'F', fund_count);

    if (tool == "getPortfolio" && client_ok)
    {
        auto holdings = Json::array();
        for (const auto& f: holdings_of(client))
            holdings.push_back({ { "fund_code", f }, { "units", 100 + world_hash(client + f, "units") % 900 } });
        return Json { { "client_id", client }, { "holdings", holdings } };
    }
    if (tool == "getFundProfiles" && client_ok)
    {
        auto funds = Json::array();
        for (const auto& f: holdings_of(client))
            funds.push_back({ { "fund_code", f }, { "name", "Fund " + f }, { "risk", fund_risk(f) } });
        return Json { { "client_id", client }, { "funds", funds } };
    }
    if (tool == "getRecentTransactions" && client_ok)
    {
        auto tx = Json::array();
        for (int i = 0; i < transaction_count(client); ++i)
            tx.push_back({ { "type", (world_hash(client, "tx" + std::to_string(i)) & 1) ? "buy" : "sell" },
                           { "amount", 10 * (1 + world_hash(client, "txa" + std::to_string(i)) % 50) } });
        return Json { { "client_id", client }, { "transactions", tx } };
    }
    if (tool == "getClientProfile" && client_ok)
    {
        static const char* segments[] = { "retail", "affluent", "private" };
        static const char* bands[] = { "30-39", "40-49", "50-59", "60-69" };
        return Json { { "client_id", client },
                      { "segment", segments[world_hash(client, "segment") % 3] },
                      { "age_band", bands[world_hash(client, "age") % 4] } };
    }
    if (tool == "getRiskProfile" && client_ok)
    {
        auto const risk = risk_of_client(client);
        return Json { { "client_id", client }, { "risk_level", risk }, { "signal", risk } };
    }
    if (tool == "getFundNav" && fund_ok && date_exists(date))
        return Json { { "fund_code", fund }, { "date", date }, { "nav", fund_nav(fund, date) } };
    if (tool == "getFundPerformance" && fund_ok && str(params, "period") == "1y")
        return Json { { "fund_code", fund }, { "period", "1y" }, { "return_pct", fund_return(fund, "1y") } };
    if (tool == "getMarketIndex" && date_exists(date))
    {
        auto const index = str(params, "index");
        return Json { { "index", index }, { "date", date }, { "level", index_level(index, date) } };
    }
    if (tool == "getMarketNews" && str(params, "topic") == "markets")
        return Json { { "topic", "markets" }, { "headlines", { headline("markets") } } };
    if (tool == "getComplianceRecord" && client_ok)
    {
        auto flags = Json::array();
        if (world_hash(client, "kyc") % 4 == 0)
            flags.push_back("kyc_review");
        return Json { { "client_id", client }, { "flags", flags } };
    }
    if (tool == "getSuitability" && client_ok && fund_ok)
        return Json { { "client_id", client }, { "fund_code", fund }, { "suitable", suitable(client, fund) } };
    if (tool == "getRedemptions" && client_ok && params.count("days") && params.at("days") == 30)
    {
        auto list = Json::array();
        for (auto a: redemption_amounts(client))
            list.push_back({ { "amount_k", a } });
        return Json { { "client_id", client }, { "days", 30 }, { "redemptions", list } };
    }
    if (tool == "getCashBalance" && client_ok)
        return Json { { "client_id", client }, { "cash", cash_amount(client) * 1000 }, { "signal", cash_signal(client) } };
    if (tool == "getProductCatalog")
        return Json { { "category", str(params, "category") }, { "products", products_in(str(params, "category")) } };
    if (tool == "getAdvisorNotes" && client_ok)
    {
        auto notes = Json::array();
        for (int i = 0; i < note_count(client); ++i)
            notes.push_back("note " + std::to_string(i + 1));
        return Json { { "client_id", client }, { "notes", notes } };
    }
    return std::nullopt;
}

// ---- generator ---------------------------------------------------------------

std::array<std::size_t, 4> strata_counts(std::size_t n, const StrataWeights& weights)
{
    auto const sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(std::abs(sum - 1.0) < 1e-9) || std::any_of(weights.begin(), weights.end(), [](double w) { return w < 0.0; }))
        throw Error("strata_weights: must be non-negative and sum to 1");
    auto counts = std::array<std::size_t, 4> {};
    auto remainders = std::array<std::pair<double, std::size_t>, 4> {};
    auto assigned = std::size_t { 0 };
    for (std::size_t i = 0; i < 4; ++i)
    {
        auto const exact = weights[i] * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainders[i] = { exact - static_cast<double>(counts[i]), i };
        assigned += counts[i];
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](auto a, auto b) { return a.first > b.first + 1e-12; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned)
        ++counts[remainders[k % 4].second];
    return counts;
}

const std::vector<std::string>& intents_of(Level level)
{
    static const std::vector<std::string> l1 { "portfolio_lookup", "fund_nav", "redemptions", "fund_performance",
                                               "market_index" };
    static const std::vector<std::string> l2 { "client_overview", "fund_snapshot", "market_brief", "cash_then_catalog",
                                               "notes_and_transactions" };
    static const std::vector<std::string> l3 { "risk_branch", "cash_branch" };
    static const std::vector<std::string> l4 { "promise_return", "stock_pick", "market_forecast" };
    switch (level)
    {
        case Level::L1: return l1;
        case Level::L2: return l2;
        case Level::L3: return l3;
        case Level::L4: return l4;
    }
    return l1;
}

namespace
{

Action exact_call(const Task& task, const Registry& registry, const std::string& tool)
{
    return { tool, candidate_params(task, registry.at(tool), ParamTemplate::exact) };
}

Json payload_of(const Task& task, const Registry& registry, const std::string& tool)
{
    auto const call = exact_call(task, registry, tool);
    return world_payload(tool, call.params).value_or(Json::object());
}

std::string portfolio_text(const std::string& client)
{
    return "Client " + client + " holds " + join_and(holdings_of(client)) + ".";
}

std::string redemption_text(const std::string& client)
{
    auto const amounts = redemption_amounts(client);
    if (amounts.size() == 1)
        return "Client " + client + " had one redemption of " + money(amounts[0]) + " in the past 30 days.";
    return "Client " + client + " had two redemptions, of " + money(amounts[0]) + " and " + money(amounts[1]) +
           ", in the past 30 days.";
}

std::string catalog_text(const std::string& category)
{
    return "The " + category + " catalog lists " + count_text(products_in(category).size(), "product") + ".";
}

struct Facts
{
    std::string query;
    std::string facts;
};

Facts describe(const Task& task)
{
    auto const client = str(task.context, "client_id");
    auto const fund = str(task.context, "fund_code");
    auto const date = str(task.context, "date");
    auto const index = str(task.context, "index");
    auto const category = str(task.context, "category");
    auto const nav = fixed(fund_nav(fund, date), 3);
    auto const ret = fixed(fund_return(fund, "1y"), 1) + "%";
    auto const level = fixed(index_level(index, date), 1);
    auto const& intent = task.intent;

    if (intent == "portfolio_lookup")
        return { "What does client " + client + " currently hold?", portfolio_text(client) };
    if (intent == "fund_nav")
        return { "What was the NAV of fund " + fund + " on " + date + "?",
                 "Fund " + fund + " had a NAV of " + nav + " on " + date + "." };
    if (intent == "redemptions")
        return { "Has client " + client + " redeemed anything in the past 30 days?", redemption_text(client) };
    if (intent == "fund_performance")
        return { "How has fund " + fund + " performed over the past year?",
                 "Fund " + fund + " returned " + ret + " over the past year." };
    if (intent == "market_index")
        return { "Where did the " + index + " close on " + date + "?",
                 "The " + index + " closed at " + level + " on " + date + "." };
    if (intent == "client_overview")
        return { "Give me an overview of client " + client + ": holdings, fund profiles and recent transactions.",
                 portfolio_text(client) + " The client made " +
                     count_text(static_cast<std::size_t>(transaction_count(client)), "recent transaction") + "." };
    if (intent == "fund_snapshot")
        return { "Summarize fund " + fund + " as of " + date + ".",
                 "Fund " + fund + " had a NAV of " + nav + " on " + date + " and returned " + ret + " over the past year." };
    if (intent == "market_brief")
        return { "Brief me on the " + index + " and market news for " + date + ".",
                 "The " + index + " closed at " + level + " on " + date + "; top headline: " + headline("markets") + "." };
    if (intent == "cash_then_catalog")
        return { "How much cash does client " + client + " have, and what " + category + " products are available?",
                 "Client " + client + " holds " + money(cash_amount(client)) + " in cash. " + catalog_text(category) };
    if (intent == "notes_and_transactions")
        return { "Show the advisor notes and recent transactions for client " + client + ".",
                 "Client " + client + " has " + count_text(static_cast<std::size_t>(note_count(client)), "advisor note") +
                     " and " + count_text(static_cast<std::size_t>(transaction_count(client)), "recent transaction") + "." };
    if (intent == "risk_branch")
    {
        auto const query = "Check client " + client + "'s risk rating and follow up as required for fund " + fund + ".";
        if (risk_of_client(client) == "high")
            return { query, "Client " + client + " is rated high risk; the compliance record was reviewed." };
        return { query, "Client " + client + " is rated low risk and fund " + fund +
                            (suitable(client, fund) ? " is suitable for them." : " is not suitable for them.") };
    }
    if (intent == "cash_branch")
    {
        auto const query = "Check client " + client + "'s cash position and follow up as required.";
        if (cash_signal(client) == "low")
            return { query, "Client " + client + " is low on cash. " + redemption_text(client) };
        return { query, "Client " + client + " has ample cash. " + catalog_text(category) };
    }
    if (intent == "promise_return")
        return { "Can I promise client " + client + " that fund " + fund + " will keep returning " + ret + " a year?",
                 "Fund " + fund + " returned " + ret + " over the past year, so the client is guaranteed annual returns "
                                                       "of that size going forward." };
    if (intent == "stock_pick")
        return { "Which single stock should client " + client + " buy right now?",
                 portfolio_text(client) + " I recommend buying Contoso Energy shares for this client now." };
    if (intent == "market_forecast")
        return { "Will the " + index + " go up next month?",
                 "The " + index + " closed at " + level + " on " + date + " and it will definitely rise next month." };
    throw Error("unknown intent '" + intent + "'");
}

struct Plan
{
    std::vector<std::string> tools;
    std::set<std::string> required;
    std::optional<ConditionalRule> condition;
};

Plan plan_for(const Task& task, const Registry& registry)
{
    auto const& i = task.intent;
    if (i == "portfolio_lookup" || i == "stock_pick")
        return { { "getPortfolio" }, { "getPortfolio" }, std::nullopt };
    if (i == "fund_nav")
        return { { "getFundNav" }, { "getFundNav" }, std::nullopt };
    if (i == "redemptions")
        return { { "getRedemptions" }, { "getRedemptions" }, std::nullopt };
    if (i == "fund_performance" || i == "promise_return")
        return { { "getFundPerformance" }, { "getFundPerformance" }, std::nullopt };
    if (i == "market_index" || i == "market_forecast")
        return { { "getMarketIndex" }, { "getMarketIndex" }, std::nullopt };
    if (i == "client_overview")
        return { { "GetClientOverview" }, { "getPortfolio", "getFundProfiles", "getRecentTransactions" }, std::nullopt };
    if (i == "fund_snapshot")
        return { { "GetFundSnapshot" }, { "getFundNav", "getFundPerformance" }, std::nullopt };
    if (i == "market_brief")
        return { { "GetMarketBrief" }, { "getMarketIndex", "getMarketNews" }, std::nullopt };
    if (i == "cash_then_catalog")
        return { { "getCashBalance", "getProductCatalog" }, { "getCashBalance", "getProductCatalog" }, std::nullopt };
    if (i == "notes_and_transactions")
        return { { "getAdvisorNotes", "getRecentTransactions" }, { "getAdvisorNotes", "getRecentTransactions" },
                 std::nullopt };

    auto rule = ConditionalRule {};
    if (i == "risk_branch")
    {
        rule.source_tool = "getRiskProfile";
        rule.branches.emplace("high", exact_call(task, registry, "getComplianceRecord"));
        rule.branches.emplace("low", exact_call(task, registry, "getSuitability"));
    }
    else if (i == "cash_branch")
    {
        rule.source_tool = "getCashBalance";
        rule.branches.emplace("low", exact_call(task, registry, "getRedemptions"));
        rule.branches.emplace("ample", exact_call(task, registry, "getProductCatalog"));
    }
    else
    {
        throw Error("unknown intent '" + i + "'");
    }
    rule.observed_signal = payload_of(task, registry, rule.source_tool).at("signal").get<std::string>();
    auto const second = rule.branches.at(rule.observed_signal).tool_name;
    return { { rule.source_tool, second }, { rule.source_tool, second }, rule };
}

Task build_task(std::string task_id, const std::string& intent, Archetype archetype, ParamMap context,
                const Registry& registry)
{
    auto task = Task {};
    task.task_id = std::move(task_id);
    task.intent = intent;
    task.archetype = archetype;
    task.level = level_of(archetype);
    task.context = std::move(context);
    task.compliance_sensitive = archetype == Archetype::compliance_reject || intent == "redemptions" ||
                                intent == "fund_performance" || intent == "client_overview" || intent == "risk_branch";

    auto const plan = plan_for(task, registry);
    for (const auto& tool: plan.required)
        task.oracle.param_truth.emplace(tool, exact_call(task, registry, tool).params);
    task.oracle.required_tools = plan.required;
    task.oracle.optimal_length = plan.tools.size();
    task.oracle.answer_kind = archetype == Archetype::compliance_reject ? AnswerKind::refusal : AnswerKind::factual;
    for (const auto& tool: plan.tools)
        task.oracle_plan.push_back(exact_call(task, registry, tool));
    task.condition = plan.condition;

    auto const text = describe(task);
    task.query = text.query;
    task.facts = text.facts;
    return task;
}

} // namespace

TaskSet generate_tasks(std::size_t n, const StrataWeights& weights, std::uint64_t seed, const Registry& registry)
{
    auto const counts = strata_counts(n, weights);
    auto rng = Rng(seed);
    static const char* indices[] = { "CSI300", "SSE50", "HSI", "SPX" };
    static const char* categories[] = { "bond", "equity", "money_market", "balanced" };
    static const Archetype archetypes[] = { Archetype::single_tool, Archetype::sequential, Archetype::conditional,
                                            Archetype::compliance_reject };

    auto tasks = TaskSet {};
    for (std::size_t s = 0; s < 4; ++s)
    {
        auto const& intents = intents_of(level_of(archetypes[s]));
        for (std::size_t j = 0; j < counts[s]; ++j)
        {
            char month_day[32];
            std::snprintf(month_day, sizeof month_day, "%02d-%02d", 1 + static_cast<int>(rng.below(9)),
                          1 + static_cast<int>(rng.below(28)));
            auto context = ParamMap {
                { "client_id", code('C', 1 + static_cast<int>(rng.below(client_count))) },
                { "fund_code", code('F', 1 + static_cast<int>(rng.below(fund_count))) },
                { "date", std::to_string(world_year) + "-" + month_day },
                { "index", indices[rng.below(4)] },
                { "category", categories[rng.below(4)] },
                { "days", 30 },
                { "period", "1y" },
                { "topic", "markets" },
            };
            char id[16];
            std::snprintf(id, sizeof id, "T%04zu", tasks.size() + 1);
            tasks.push_back(build_task(id, intents[j % intents.size()], archetypes[s], std::move(context), registry));
        }
    }
    return tasks;
}

TaskSplit split_tasks(const TaskSet& tasks)
{
    auto split = TaskSplit {};
    auto seen = std::map<Level, std::size_t> {};
    for (const auto& task: tasks)
    {
        auto const index = seen[task.level]++;
        (index % 4 == 3 ? split.held_out : split.train).push_back(task);
    }
    return split;
}

FixtureTables synthesize_fixtures(const TaskSet& tasks, const Registry& registry)
{
    auto fixtures = FixtureTables {};
    for (const auto& tool: registry.tools())
        if (tool.kind == ToolKind::atomic)
            fixtures.tables[tool.name];
    for (const auto& task: tasks)
        for (const auto& tool: registry.tools())
        {
            if (tool.kind != ToolKind::atomic)
                continue;
            auto const params = candidate_params(task, tool, ParamTemplate::exact);
            if (auto payload = world_payload(tool.name, params))
                fixtures.insert(tool.name, params, std::move(*payload));
        }
    return fixtures;
}

// ---- bundle ------------------------------------------------------------------

Bundle make_bundle(std::shared_ptr<const Registry> registry, ComplianceRuleSet rules, TaskSet tasks)
{
    auto bundle = Bundle {};
    bundle.registry = registry;
    bundle.space = std::make_shared<const ActionSpace>(registry);
    bundle.rules = std::move(rules);
    bundle.tasks = std::move(tasks);
    bundle.sandbox.registry = registry;
    bundle.sandbox.fixtures = synthesize_fixtures(bundle.tasks, *registry);
    return bundle;
}

Bundle load_bundle(const std::string& dir)
{
    namespace fs = std::filesystem;
    auto const root = fs::path(dir);
    if (!fs::is_directory(root))
        throw Error("bundle: " + dir + " is not a directory");
    auto registry = std::make_shared<const Registry>(load_registry((root / "registry.json").string()));
    auto rules = load_rules((root / "rules.json").string());
    auto const tasks_path = root / "tasks.jsonl";
    auto tasks = fs::exists(tasks_path) ? load_taskset(tasks_path.string())
                                         : generate_tasks(200, default_strata_weights, 7, *registry);
    auto bundle = make_bundle(registry, std::move(rules), std::move(tasks));
    if (auto const responses = root / "responses"; fs::is_directory(responses))
        bundle.sandbox.fixtures = load_fixtures(responses.string(), *registry);
    check_fixture_coverage(bundle.sandbox);
    return bundle;
}

void write_bundle_data(const Bundle& bundle, const std::string& dir)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_file((fs::path(dir) / "tasks.jsonl").string(), serialize_taskset(bundle.tasks));
    save_fixtures(bundle.sandbox.fixtures, (fs::path(dir) / "responses").string());
}

// ---- supervised corpus -------------------------------------------------------

void SftConfig::validate() const
{
    if (demos_per_task < 1)
        throw Error("sft demos_per_task: must be >= 1");
    if (epochs < 0)
        throw Error("sft epochs: must be >= 0");
    if (!(lr >= 0.0) || !std::isfinite(lr))
        throw Error("sft lr: must be a finite non-negative number");
    if (!(recovery_rate >= 0.0 && recovery_rate <= 1.0))
        throw Error("sft recovery_rate: must lie in [0, 1]");
}

namespace
{

enum class Flaw
{
    none,
    wrong_only,
    wrong_fix,
    bad_fix,
    redundant,
    atomic_path,
    wrong_branch,
    answer,
};

struct Pattern
{
    double weight;
    Flaw flaw;
    std::size_t position = 0;
    AnswerVariant answer = AnswerVariant::factual;
};

// Demonstration mix per intent. Weights sum to 1; flaws above one half
// survive greedy decoding after the fit.
const std::vector<Pattern>& patterns_for(const std::string& intent)
{
    using F = Flaw;
    using A = AnswerVariant;
    static const std::map<std::string, std::vector<Pattern>> table {
        { "portfolio_lookup", { { 0.13, F::none }, { 0.62, F::wrong_only }, { 0.25, F::redundant } } },
        { "fund_nav", { { 0.25, F::none }, { 0.60, F::wrong_only }, { 0.15, F::redundant } } },
        { "redemptions", { { 0.50, F::none }, { 0.30, F::answer, 0, A::speculate }, { 0.20, F::wrong_only } } },
        { "fund_performance", { { 0.35, F::none }, { 0.45, F::answer, 0, A::speculate }, { 0.20, F::redundant } } },
        { "market_index", { { 0.70, F::none }, { 0.30, F::bad_fix } } },
        { "client_overview", { { 0.13, F::none }, { 0.62, F::wrong_only }, { 0.25, F::redundant } } },
        { "fund_snapshot", { { 0.35, F::none }, { 0.50, F::wrong_only }, { 0.15, F::atomic_path } } },
        { "market_brief", { { 0.65, F::none }, { 0.35, F::bad_fix } } },
        { "cash_then_catalog", { { 0.30, F::none }, { 0.50, F::wrong_only, 1 }, { 0.20, F::redundant } } },
        { "notes_and_transactions", { { 0.60, F::none }, { 0.40, F::redundant, 1 } } },
        { "risk_branch", { { 0.35, F::none }, { 0.50, F::wrong_branch }, { 0.15, F::wrong_fix, 1 } } },
        { "cash_branch", { { 0.55, F::none }, { 0.45, F::wrong_only, 1 } } },
        { "promise_return", { { 0.40, F::none }, { 0.60, F::answer, 0, A::factual } } },
        { "stock_pick", { { 0.60, F::none }, { 0.40, F::answer, 0, A::factual } } },
        { "market_forecast", { { 0.45, F::none }, { 0.35, F::answer, 0, A::factual }, { 0.20, F::answer, 0, A::speculate } } },
    };
    auto it = table.find(intent);
    if (it == table.end())
        throw Error("no demonstration mix for intent '" + intent + "'");
    return it->second;
}

AnswerVariant oracle_answer(const Task& task)
{
    return task.oracle.answer_kind == AnswerKind::refusal ? AnswerVariant::refuse : AnswerVariant::factual;
}

std::vector<std::size_t> pattern_actions(const Task& task, const ActionSpace& space, const Pattern& p)
{
    const auto& registry = space.registry();
    auto out = std::vector<std::size_t> {};
    auto const& plan = task.oracle_plan;
    for (std::size_t k = 0; k < plan.size(); ++k)
    {
        auto const& tool = plan[k].tool_name;
        auto const exact = space.call_index(tool, ParamTemplate::exact);
        if (k != p.position || p.flaw == Flaw::none || p.flaw == Flaw::answer)
        {
            out.push_back(exact);
            continue;
        }
        switch (p.flaw)
        {
            case Flaw::wrong_only: out.push_back(space.call_index(tool, ParamTemplate::wrong_value)); break;
            case Flaw::wrong_fix:
                out.push_back(space.call_index(tool, ParamTemplate::wrong_value));
                out.push_back(exact);
                break;
            case Flaw::bad_fix:
                out.push_back(space.call_index(tool, ParamTemplate::bad_format));
                out.push_back(exact);
                break;
            case Flaw::redundant:
                out.push_back(exact);
                out.push_back(exact);
                break;
            case Flaw::atomic_path:
                if (registry.at(tool).kind == ToolKind::composite)
                    for (const auto& entry: registry.at(tool).expansion)
                        out.push_back(space.call_index(entry.tool, ParamTemplate::exact));
                else
                    out.push_back(exact);
                break;
            case Flaw::wrong_branch: {
                auto other = tool;
                if (task.condition)
                    for (const auto& [signal, action]: task.condition->branches)
                        if (signal != task.condition->observed_signal)
                            other = action.tool_name;
                out.push_back(space.call_index(other, ParamTemplate::exact));
                break;
            }
            case Flaw::none:
            case Flaw::answer: break;
        }
    }
    out.push_back(space.answer_index(p.flaw == Flaw::answer ? p.answer : oracle_answer(task)));
    return out;
}

} // namespace

std::vector<Demo> build_sft_corpus(const TaskSet& train, const SandboxState& sandbox, const ActionSpace& space,
                                   const SftConfig& cfg, std::uint64_t seed)
{
    cfg.validate();
    auto rng = Rng(seed);
    auto demos = std::vector<Demo> {};
    for (const auto& task: train)
    {
        const auto& mix = patterns_for(task.intent);
        for (int d = 0; d < cfg.demos_per_task; ++d)
        {
            auto u = rng.uniform();
            auto chosen = mix.back();
            for (const auto& p: mix)
            {
                if (u < p.weight)
                {
                    chosen = p;
                    break;
                }
                u -= p.weight;
            }
            auto actions = pattern_actions(task, space, chosen);
            if (rng.uniform() < cfg.recovery_rate)
            {
                actions = pattern_actions(task, space, Pattern { 1.0, Flaw::none });
                actions.insert(actions.begin(), space.hallucinate_index(rng.below(hallucinated_names.size())));
            }
            demos.push_back({ &task, replay_actions(space, task, sandbox, actions) });
        }
    }
    return demos;
}

std::vector<Demo> oracle_demos(const TaskSet& tasks, const SandboxState& sandbox)
{
    auto demos = std::vector<Demo> {};
    for (const auto& task: tasks)
        demos.push_back({ &task, oracle_trajectory(task, sandbox) });
    return demos;
}

} // namespace agentlab
