#include "ctsm/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "ctsm/calendar.hpp"
#include "ctsm/errors.hpp"

namespace ctsm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '"')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '"')) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

bool is_missing(const std::string& cell) {
    return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "ND" ||
           cell == "." || cell == "null";
}

double parse_number(const std::string& cell, int row, const std::string& column) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) {
        throw ParseError("row " + std::to_string(row) + ", column " + column + ": cannot parse '" +
                         cell + "' as a number");
    }
    return v;
}

struct RawTable {
    std::vector<std::string> header;           // excluding the date column
    std::vector<Date> dates;
    std::vector<std::vector<std::string>> cells;  // per row, per column
};

// Reads `date,<labels...>` and returns rows sorted by date; duplicate dates
// are rejected.
RawTable read_table(std::istream& in, std::string_view what) {
    RawTable t;
    std::string line;
    int row = 0;
    bool have_header = false;
    std::map<std::chrono::sys_days, std::size_t> seen;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        auto fields = split(line);
        if (!have_header) {
            if (fields.empty() || fields[0] != "date") {
                throw ParseError(std::string(what) + ": header must start with 'date' (row " +
                                 std::to_string(row) + ")");
            }
            t.header.assign(fields.begin() + 1, fields.end());
            for (const auto& h : t.header) {
                if (h.empty()) throw ParseError(std::string(what) + ": empty column name in header");
            }
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size() + 1) {
            throw ParseError(std::string(what) + ": row " + std::to_string(row) + " has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(t.header.size() + 1));
        }
        Date d;
        try {
            d = parse_date(fields[0]);
        } catch (const ParseError& e) {
            throw ParseError(std::string(what) + ": row " + std::to_string(row) + ", column date: " + e.what());
        }
        const std::chrono::sys_days key{d};
        if (seen.count(key)) {
            throw ParseError(std::string(what) + ": duplicate date " + format_date(d) + " at row " +
                             std::to_string(row));
        }
        seen.emplace(key, t.dates.size());
        t.dates.push_back(d);
        t.cells.emplace_back(fields.begin() + 1, fields.end());
    }
    if (!have_header) throw ParseError(std::string(what) + ": missing header");

    std::vector<std::size_t> order(t.dates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::chrono::sys_days{t.dates[a]} < std::chrono::sys_days{t.dates[b]};
    });
    RawTable sorted;
    sorted.header = t.header;
    for (std::size_t i : order) {
        sorted.dates.push_back(t.dates[i]);
        sorted.cells.push_back(std::move(t.cells[i]));
    }
    return sorted;
}

std::vector<int> pick_columns(const RawTable& t, const std::vector<std::string>& wanted,
                              std::string_view what) {
    std::vector<int> cols;
    for (const auto& w : wanted) {
        const int c = index_of(t.header, w);
        if (c < 0) throw ParseError(std::string(what) + ": column '" + w + "' not found in header");
        cols.push_back(c);
    }
    return cols;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open '" + path.string() + "' for reading");
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot open '" + path.string() + "' for writing");
    return out;
}

int tenor_months(const std::string& label) {
    return static_cast<int>(std::lround(yield_tenor_years(label) * 12.0));
}

}  // namespace

std::string format_double(double value) {
    if (std::isnan(value)) return "";
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

Panel load_futures_csv(std::istream& in, const std::vector<std::string>& contracts,
                       const FuturesLoadOptions& options, IngestReport* report) {
    const RawTable t = read_table(in, "futures csv");
    std::vector<std::string> labels;
    for (const auto& l : contracts.empty() ? t.header : contracts) {
        if (options.exclude_front && contract_number(l) == 1) continue;
        labels.push_back(l);
    }
    const std::vector<int> cols = pick_columns(t, labels, "futures csv");
    std::vector<int> numbers;
    for (const auto& l : labels) numbers.push_back(contract_number(l));

    Panel p;
    p.step = options.step;
    p.dates = t.dates;
    p.futures_labels = labels;
    const int n = static_cast<int>(t.dates.size());
    const int h = static_cast<int>(labels.size());
    if (n == 0) throw EmptyPanel("futures csv contains no data rows");
    p.log_futures = Eigen::MatrixXd::Constant(n, h, kNaN);
    p.futures_tau.resize(n, h);
    p.futures_mask = MaskMatrix::Constant(n, h, false);
    p.yields.resize(n, 0);
    p.yield_mask.resize(n, 0);
    IngestReport local;
    local.rows_read = n;
    for (int r = 0; r < n; ++r) {
        for (int i = 0; i < h; ++i) {
            p.futures_tau(r, i) = maturity_of(t.dates[static_cast<std::size_t>(r)], numbers[static_cast<std::size_t>(i)]);
            const std::string& cell = t.cells[static_cast<std::size_t>(r)][static_cast<std::size_t>(cols[static_cast<std::size_t>(i)])];
            if (is_missing(cell)) {
                ++local.masked_missing;
                continue;
            }
            const double price = parse_number(cell, r + 2, labels[static_cast<std::size_t>(i)]);
            if (!(price > 0.0) || !std::isfinite(price)) {
                ++local.masked_nonpositive;
                local.notes.push_back("masked non-positive price " + cell + " for " +
                                      labels[static_cast<std::size_t>(i)] + " on " +
                                      format_date(t.dates[static_cast<std::size_t>(r)]));
                continue;
            }
            p.log_futures(r, i) = std::log(price);
            p.futures_mask(r, i) = true;
        }
    }
    if (report) *report = std::move(local);
    return p;
}

Panel load_futures_csv(const std::filesystem::path& path, const std::vector<std::string>& contracts,
                       const FuturesLoadOptions& options, IngestReport* report) {
    auto in = open_in(path);
    return load_futures_csv(in, contracts, options, report);
}

Panel load_yields_csv(std::istream& in, const std::vector<std::string>& tenors, IngestReport* report) {
    const RawTable t = read_table(in, "yields csv");
    const std::vector<std::string> labels = tenors.empty() ? t.header : tenors;
    const std::vector<int> cols = pick_columns(t, labels, "yields csv");
    Panel p;
    p.dates = t.dates;
    p.yield_labels = labels;
    for (const auto& l : labels) p.yield_maturities.push_back(yield_tenor_years(l));
    const int n = static_cast<int>(t.dates.size());
    const int k = static_cast<int>(labels.size());
    if (n == 0) throw EmptyPanel("yields csv contains no data rows");
    p.yields = Eigen::MatrixXd::Constant(n, k, kNaN);
    p.yield_mask = MaskMatrix::Constant(n, k, false);
    p.log_futures.resize(n, 0);
    p.futures_tau.resize(n, 0);
    p.futures_mask.resize(n, 0);
    IngestReport local;
    local.rows_read = n;
    for (int r = 0; r < n; ++r) {
        for (int j = 0; j < k; ++j) {
            const std::string& cell = t.cells[static_cast<std::size_t>(r)][static_cast<std::size_t>(cols[static_cast<std::size_t>(j)])];
            if (is_missing(cell)) {
                ++local.masked_missing;
                continue;
            }
            const double pct = parse_number(cell, r + 2, labels[static_cast<std::size_t>(j)]);
            if (!std::isfinite(pct)) {
                ++local.masked_missing;
                continue;
            }
            p.yields(r, j) = pct / 100.0;
            p.yield_mask(r, j) = true;
        }
    }
    if (report) *report = std::move(local);
    return p;
}

Panel load_yields_csv(const std::filesystem::path& path, const std::vector<std::string>& tenors,
                      IngestReport* report) {
    auto in = open_in(path);
    return load_yields_csv(in, tenors, report);
}

Panel join_panels(const Panel& futures, const Panel& yields, IngestReport* report) {
    std::map<std::chrono::sys_days, int> yield_row;
    for (int r = 0; r < yields.num_dates(); ++r)
        yield_row.emplace(std::chrono::sys_days{yields.dates[static_cast<std::size_t>(r)]}, r);

    std::vector<std::pair<int, int>> rows;
    for (int r = 0; r < futures.num_dates(); ++r) {
        const auto it = yield_row.find(std::chrono::sys_days{futures.dates[static_cast<std::size_t>(r)]});
        if (it != yield_row.end()) rows.emplace_back(r, it->second);
    }
    if (rows.empty()) throw EmptyPanel("futures and yield panels share no dates");

    const int n = static_cast<int>(rows.size());
    Panel p;
    p.step = futures.step;
    p.futures_labels = futures.futures_labels;
    p.yield_labels = yields.yield_labels;
    p.yield_maturities = yields.yield_maturities;
    p.log_futures.resize(n, futures.num_futures());
    p.futures_tau.resize(n, futures.num_futures());
    p.futures_mask.resize(n, futures.num_futures());
    p.yields.resize(n, yields.num_yields());
    p.yield_mask.resize(n, yields.num_yields());
    for (int i = 0; i < n; ++i) {
        const auto [fr, yr] = rows[static_cast<std::size_t>(i)];
        p.dates.push_back(futures.dates[static_cast<std::size_t>(fr)]);
        p.log_futures.row(i) = futures.log_futures.row(fr);
        p.futures_tau.row(i) = futures.futures_tau.row(fr);
        p.futures_mask.row(i) = futures.futures_mask.row(fr);
        p.yields.row(i) = yields.yields.row(yr);
        p.yield_mask.row(i) = yields.yield_mask.row(yr);
    }
    if (report) {
        report->rows_read = n;
        report->dates_dropped = futures.num_dates() + yields.num_dates() - 2 * n;
        report->notes.push_back("joined " + std::to_string(n) + " common dates");
    }
    return p;
}

void write_futures_csv(std::ostream& out, const Panel& panel) {
    out << "date";
    for (const auto& l : panel.futures_labels) out << ',' << l;
    out << '\n';
    for (int t = 0; t < panel.num_dates(); ++t) {
        out << format_date(panel.dates[static_cast<std::size_t>(t)]);
        for (int i = 0; i < panel.num_futures(); ++i) {
            out << ',';
            if (panel.futures_mask(t, i)) out << format_double(std::exp(panel.log_futures(t, i)));
        }
        out << '\n';
    }
}

void write_yields_csv(std::ostream& out, const Panel& panel) {
    out << "date";
    for (const auto& l : panel.yield_labels) out << ',' << l;
    out << '\n';
    for (int t = 0; t < panel.num_dates(); ++t) {
        out << format_date(panel.dates[static_cast<std::size_t>(t)]);
        for (int j = 0; j < panel.num_yields(); ++j) {
            out << ',';
            if (panel.yield_mask(t, j)) out << format_double(panel.yields(t, j) * 100.0);
        }
        out << '\n';
    }
}

void write_panel_csv(std::ostream& out, const Panel& panel) {
    out << "date";
    for (const auto& l : panel.futures_labels) out << ",ln_F_" << contract_number(l);
    for (const auto& l : panel.yield_labels) out << ",R_" << tenor_months(l);
    for (const auto& l : panel.futures_labels) out << ",tau_F_" << contract_number(l);
    out << '\n';
    for (int t = 0; t < panel.num_dates(); ++t) {
        out << format_date(panel.dates[static_cast<std::size_t>(t)]);
        for (int i = 0; i < panel.num_futures(); ++i)
            out << ',' << (panel.futures_mask(t, i) ? format_double(panel.log_futures(t, i)) : "");
        for (int j = 0; j < panel.num_yields(); ++j)
            out << ',' << (panel.yield_mask(t, j) ? format_double(panel.yields(t, j)) : "");
        for (int i = 0; i < panel.num_futures(); ++i) out << ',' << format_double(panel.futures_tau(t, i));
        out << '\n';
    }
}

Panel read_panel_csv(std::istream& in, double step) {
    const RawTable t = read_table(in, "panel csv");
    std::vector<int> f_cols, y_cols, tau_cols;
    Panel p;
    p.step = step;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        const std::string& h = t.header[c];
        if (h.rfind("ln_F_", 0) == 0) {
            p.futures_labels.push_back("F" + h.substr(5));
            f_cols.push_back(static_cast<int>(c));
        } else if (h.rfind("tau_F_", 0) == 0) {
            tau_cols.push_back(static_cast<int>(c));
        } else if (h.rfind("R_", 0) == 0) {
            p.yield_labels.push_back("R" + h.substr(2));
            p.yield_maturities.push_back(yield_tenor_years(p.yield_labels.back()));
            y_cols.push_back(static_cast<int>(c));
        } else {
            throw ParseError("panel csv: unexpected column '" + h + "'");
        }
    }
    // Maturity columns are matched to futures by contract number.
    std::vector<int> tau_for(f_cols.size(), -1);
    for (int c : tau_cols) {
        const int idx = index_of(p.futures_labels, "F" + t.header[static_cast<std::size_t>(c)].substr(6));
        if (idx < 0) throw ParseError("panel csv: maturity column without price column");
        tau_for[static_cast<std::size_t>(idx)] = c;
    }
    for (int c : tau_for) {
        if (c < 0) throw ParseError("panel csv: price column without maturity column");
    }
    const int n = static_cast<int>(t.dates.size());
    if (n == 0) throw EmptyPanel("panel csv contains no data rows");
    const int h = static_cast<int>(f_cols.size());
    const int k = static_cast<int>(y_cols.size());
    p.dates = t.dates;
    p.log_futures = Eigen::MatrixXd::Constant(n, h, kNaN);
    p.futures_tau = Eigen::MatrixXd::Constant(n, h, kNaN);
    p.futures_mask = MaskMatrix::Constant(n, h, false);
    p.yields = Eigen::MatrixXd::Constant(n, k, kNaN);
    p.yield_mask = MaskMatrix::Constant(n, k, false);
    for (int r = 0; r < n; ++r) {
        const auto& row = t.cells[static_cast<std::size_t>(r)];
        for (int i = 0; i < h; ++i) {
            const std::string& cell = row[static_cast<std::size_t>(f_cols[static_cast<std::size_t>(i)])];
            const std::string& tau = row[static_cast<std::size_t>(tau_for[static_cast<std::size_t>(i)])];
            if (!is_missing(tau)) p.futures_tau(r, i) = parse_number(tau, r + 2, "tau_" + p.futures_labels[static_cast<std::size_t>(i)]);
            if (is_missing(cell)) continue;
            p.log_futures(r, i) = parse_number(cell, r + 2, p.futures_labels[static_cast<std::size_t>(i)]);
            p.futures_mask(r, i) = true;
        }
        for (int j = 0; j < k; ++j) {
            const std::string& cell = row[static_cast<std::size_t>(y_cols[static_cast<std::size_t>(j)])];
            if (is_missing(cell)) continue;
            p.yields(r, j) = parse_number(cell, r + 2, p.yield_labels[static_cast<std::size_t>(j)]);
            p.yield_mask(r, j) = true;
        }
    }
    return p;
}

void write_panel_csv(const std::filesystem::path& path, const Panel& panel) {
    auto out = open_out(path);
    write_panel_csv(out, panel);
}

Panel read_panel_csv(const std::filesystem::path& path, double step) {
    auto in = open_in(path);
    return read_panel_csv(in, step);
}

void write_states_csv(std::ostream& out, const Panel& panel, const Eigen::MatrixXd& states,
                      const std::vector<std::string>& names) {
    if (states.rows() != panel.num_dates()) throw InvalidArgument("state rows do not match panel dates");
    out << "date";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (int t = 0; t < panel.num_dates(); ++t) {
        out << format_date(panel.dates[static_cast<std::size_t>(t)]);
        for (int i = 0; i < states.cols(); ++i) out << ',' << format_double(states(t, i));
        out << '\n';
    }
}

}  // namespace ctsm
