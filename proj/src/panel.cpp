#include "vmem/panel.hpp"

#include "vmem/csv.hpp"
#include "vmem/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

namespace vmem {

double compute_parkinson_hlr(double high, double low) {
    if (!(std::isfinite(high) && std::isfinite(low)) || low <= 0.0 || high < low)
        throw DomainError(fmt::format("invalid high/low pair (high={}, low={}): need high >= low > 0", high, low));
    const double log_range = std::log(high) - std::log(low);
    return 100.0 * log_range * log_range / (4.0 * std::log(2.0));
}

// ---------------------------------------------------------------------------

VolatilityPanel VolatilityPanel::from_levels(std::vector<std::string> tickers, std::vector<Date> dates,
                                             Matrix y, std::size_t split_index) {
    for (Eigen::Index j = 0; j < y.cols(); ++j)
        for (Eigen::Index t = 0; t < y.rows(); ++t)
            if (!(y(t, j) > 0.0) || !std::isfinite(y(t, j)))
                throw DomainError(fmt::format("volatility must be positive and finite (row {}, column {}, value {})",
                                              t, j, y(t, j)));
    VolatilityPanel panel;
    panel.tickers_ = std::move(tickers);
    panel.dates_ = std::move(dates);
    panel.x_ = y.array().log().matrix();
    panel.y_ = std::move(y);
    panel.finish(split_index);
    return panel;
}

VolatilityPanel VolatilityPanel::from_logs(std::vector<std::string> tickers, std::vector<Date> dates, Matrix x,
                                           std::size_t split_index) {
    if (!x.allFinite()) throw DomainError("log-volatility panel contains non-finite values");
    VolatilityPanel panel;
    panel.tickers_ = std::move(tickers);
    panel.dates_ = std::move(dates);
    panel.y_ = x.array().exp().matrix();
    panel.x_ = std::move(x);
    panel.finish(split_index);
    return panel;
}

void VolatilityPanel::finish(std::size_t split_index) {
    const auto T = static_cast<std::size_t>(x_.rows());
    if (tickers_.size() != static_cast<std::size_t>(x_.cols()))
        throw Error(fmt::format("panel has {} columns but {} tickers", x_.cols(), tickers_.size()));
    if (dates_.size() != T) throw Error(fmt::format("panel has {} rows but {} dates", T, dates_.size()));
    if (T == 0 || tickers_.empty()) throw Error("panel is empty");
    for (std::size_t t = 1; t < T; ++t)
        if (!(dates_[t - 1] < dates_[t]))
            throw Error("panel dates must be strictly increasing (at " + format_date(dates_[t]) + ")");
    if (std::set<std::string>(tickers_.begin(), tickers_.end()).size() != tickers_.size())
        throw Error("panel tickers must be unique");
    if (split_index < 1 || split_index > T)
        throw Error(fmt::format("split index {} outside [1, {}]: the training window must be non-empty",
                                split_index, T));
    split_ = split_index;
    x_bar_ = x_.topRows(static_cast<Eigen::Index>(split_)).colwise().mean().transpose();
}

VolatilityPanel VolatilityPanel::with_split(std::size_t split_index) const {
    VolatilityPanel copy = *this;
    copy.finish(split_index);
    return copy;
}

std::size_t VolatilityPanel::first_row_on_or_after(const Date& date) const {
    const auto it = std::lower_bound(dates_.begin(), dates_.end(), date);
    return static_cast<std::size_t>(it - dates_.begin());
}

std::optional<std::size_t> VolatilityPanel::ticker_index(const std::string& ticker) const {
    const auto it = std::find(tickers_.begin(), tickers_.end(), ticker);
    if (it == tickers_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - tickers_.begin());
}

// ---------------------------------------------------------------------------

namespace {

std::string describe(const OhlcRecord& r) {
    return fmt::format("record (date {}, ticker {})", format_date(r.date), r.ticker);
}

std::size_t split_for(const std::vector<Date>& dates, std::optional<Date> split_date) {
    if (!split_date) return dates.size();
    const auto row = static_cast<std::size_t>(std::lower_bound(dates.begin(), dates.end(), *split_date) - dates.begin());
    if (row == 0)
        throw Error("split date " + format_date(*split_date) + " leaves no in-sample rows");
    return row;
}

}  // namespace

VolatilityPanel build_panel(const std::vector<OhlcRecord>& records, std::optional<Date> split_date) {
    std::vector<std::string> tickers;
    std::unordered_map<std::string, std::size_t> column_of;
    std::map<Date, std::vector<const OhlcRecord*>> by_date;

    for (const auto& r : records) {
        if (!(std::isfinite(r.high) && std::isfinite(r.low)) || r.low <= 0.0 || r.high < r.low)
            throw DomainError(describe(r) + fmt::format(": need high >= low > 0, got high={} low={}", r.high, r.low));
        auto [it, inserted] = column_of.try_emplace(r.ticker, tickers.size());
        if (inserted) tickers.push_back(r.ticker);
        auto& row = by_date[r.date];
        if (row.size() < tickers.size()) row.resize(tickers.size(), nullptr);
        if (row[it->second] != nullptr) throw Error("duplicate " + describe(r));
        row[it->second] = &r;
    }

    std::vector<Date> dates;
    std::vector<std::vector<const OhlcRecord*>> kept;
    for (auto& [date, row] : by_date) {
        row.resize(tickers.size(), nullptr);
        if (std::all_of(row.begin(), row.end(), [](const OhlcRecord* p) { return p != nullptr; })) {
            dates.push_back(date);
            kept.push_back(row);
        }
    }
    if (dates.size() < 2)
        throw Error(fmt::format("only {} date(s) are common to all {} tickers; need at least 2", dates.size(),
                                tickers.size()));

    Matrix y(static_cast<Eigen::Index>(dates.size()), static_cast<Eigen::Index>(tickers.size()));
    for (std::size_t t = 0; t < kept.size(); ++t) {
        for (std::size_t j = 0; j < tickers.size(); ++j) {
            const OhlcRecord& r = *kept[t][j];
            const double hlr = compute_parkinson_hlr(r.high, r.low);
            if (hlr <= 0.0)
                throw DomainError(describe(r) + ": zero-range day (high == low) has undefined log volatility");
            y(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = hlr;
        }
    }
    const std::size_t split = split_for(dates, split_date);
    return VolatilityPanel::from_levels(std::move(tickers), std::move(dates), std::move(y), split);
}

// ---------------------------------------------------------------------------

namespace {

struct CsvDocument {
    std::vector<std::string> header;
    std::size_t header_line = 0;
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line number, fields)
    std::optional<Date> split_date;
};

CsvDocument read_document(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string(), "cannot open file");
    CsvDocument doc;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (line.front() == '#') {
            constexpr std::string_view key = "split_date=";
            const auto pos = line.find(key);
            if (pos != std::string::npos) {
                auto date = parse_date(std::string_view(line).substr(pos + key.size(), 10));
                if (!date) throw ParseError(path.string(), number, "malformed split_date comment");
                doc.split_date = date;
            }
            continue;
        }
        auto fields = csv::split_line(line);
        if (doc.header.empty()) {
            doc.header = std::move(fields);
            doc.header_line = number;
        } else {
            doc.rows.emplace_back(number, std::move(fields));
        }
    }
    if (doc.header.empty()) throw ParseError(path.string(), "missing header line");
    return doc;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::optional<std::size_t> column(const std::vector<std::string>& header, std::string_view name) {
    for (std::size_t k = 0; k < header.size(); ++k)
        if (lower(header[k]) == name) return k;
    return std::nullopt;
}

bool looks_long(const std::vector<std::string>& header) {
    return column(header, "ticker") && column(header, "high") && column(header, "low");
}

std::vector<OhlcRecord> records_from(const CsvDocument& doc, const std::string& source) {
    const auto date_col = column(doc.header, "date");
    const auto ticker_col = column(doc.header, "ticker");
    const auto high_col = column(doc.header, "high");
    const auto low_col = column(doc.header, "low");
    if (!date_col || !ticker_col || !high_col || !low_col)
        throw ParseError(source, doc.header_line, "long format needs columns date,ticker,high,low");
    const std::size_t width = std::max({*date_col, *ticker_col, *high_col, *low_col}) + 1;

    std::vector<OhlcRecord> records;
    records.reserve(doc.rows.size());
    for (const auto& [line, fields] : doc.rows) {
        if (fields.size() < width) throw ParseError(source, line, "too few fields");
        OhlcRecord r;
        const auto date = parse_date(fields[*date_col]);
        if (!date) throw ParseError(source, line, "malformed date '" + fields[*date_col] + "'");
        r.date = *date;
        r.ticker = fields[*ticker_col];
        if (r.ticker.empty()) throw ParseError(source, line, "empty ticker");
        const auto high = csv::parse_double(fields[*high_col]);
        const auto low = csv::parse_double(fields[*low_col]);
        if (!high || !low) throw ParseError(source, line, "malformed high/low value");
        r.high = *high;
        r.low = *low;
        if (!(r.low > 0.0) || r.high < r.low || !std::isfinite(r.high))
            throw ParseError(source, line,
                             fmt::format("invalid {}: need high >= low > 0, got high={} low={}", describe(r), r.high,
                                         r.low));
        records.push_back(std::move(r));
    }
    return records;
}

VolatilityPanel wide_from(const CsvDocument& doc, const std::string& source, std::optional<Date> split_date) {
    if (doc.header.size() < 2 || lower(doc.header.front()) != "date")
        throw ParseError(source, doc.header_line, "wide format needs header date,<ticker1>,...");
    std::vector<std::string> tickers(doc.header.begin() + 1, doc.header.end());
    for (const auto& t : tickers)
        if (t.empty()) throw ParseError(source, doc.header_line, "empty ticker name in header");
    if (std::set<std::string>(tickers.begin(), tickers.end()).size() != tickers.size())
        throw ParseError(source, doc.header_line, "duplicate ticker column");

    std::vector<std::pair<Date, std::size_t>> order;  // (date, index into doc.rows)
    Matrix raw(static_cast<Eigen::Index>(doc.rows.size()), static_cast<Eigen::Index>(tickers.size()));
    for (std::size_t r = 0; r < doc.rows.size(); ++r) {
        const auto& [line, fields] = doc.rows[r];
        if (fields.size() != doc.header.size())
            throw ParseError(source, line, fmt::format("expected {} fields, found {}", doc.header.size(), fields.size()));
        const auto date = parse_date(fields[0]);
        if (!date) throw ParseError(source, line, "malformed date '" + fields[0] + "'");
        for (std::size_t j = 0; j < tickers.size(); ++j) {
            const auto value = csv::parse_double(fields[j + 1]);
            if (!value) throw ParseError(source, line, "malformed value for " + tickers[j]);
            if (!(*value > 0.0) || !std::isfinite(*value))
                throw ParseError(source, line,
                                 fmt::format("non-positive volatility for {} on {} (log undefined)", tickers[j],
                                             format_date(*date)));
            raw(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = *value;
        }
        order.emplace_back(*date, r);
    }
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 1; k < order.size(); ++k)
        if (order[k].first == order[k - 1].first)
            throw ParseError(source, doc.rows[order[k].second].first, "duplicate date " + format_date(order[k].first));
    if (order.size() < 2) throw ParseError(source, "wide panel needs at least 2 rows");

    std::vector<Date> dates;
    Matrix y(raw.rows(), raw.cols());
    for (std::size_t k = 0; k < order.size(); ++k) {
        dates.push_back(order[k].first);
        y.row(static_cast<Eigen::Index>(k)) = raw.row(static_cast<Eigen::Index>(order[k].second));
    }
    const std::size_t split = split_for(dates, split_date);
    return VolatilityPanel::from_levels(std::move(tickers), std::move(dates), std::move(y), split);
}

}  // namespace

std::vector<OhlcRecord> load_ohlc_csv(const std::filesystem::path& path) {
    return records_from(read_document(path), path.string());
}

VolatilityPanel load_panel_csv(const std::filesystem::path& path, PanelFormat format, std::optional<Date> split_date) {
    const CsvDocument doc = read_document(path);
    const auto split = split_date ? split_date : doc.split_date;
    if (format == PanelFormat::automatic) format = looks_long(doc.header) ? PanelFormat::long_ohlc : PanelFormat::wide;
    if (format == PanelFormat::long_ohlc) return build_panel(records_from(doc, path.string()), split);
    return wide_from(doc, path.string(), split);
}

void save_panel_csv(const VolatilityPanel& panel, const std::filesystem::path& path) {
    auto out = csv::open_output(path);
    if (panel.has_holdout()) out << "# split_date=" << format_date(panel.dates()[panel.split_index()]) << '\n';
    out << "date";
    for (const auto& t : panel.tickers()) out << ',' << t;
    out << '\n';
    for (std::size_t t = 0; t < panel.rows(); ++t) {
        out << format_date(panel.dates()[t]);
        for (std::size_t j = 0; j < panel.assets(); ++j)
            out << ',' << csv::format_double(panel.y()(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)));
        out << '\n';
    }
    if (!out) throw Error("failed writing " + path.string());
}

}  // namespace vmem
