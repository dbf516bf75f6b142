#pragma once

#include "vmem/date.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vmem {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One daily price range observation.
struct OhlcRecord {
    Date date;
    std::string ticker;
    double high = 0.0;
    double low = 0.0;
};

/// Parkinson high-low range volatility proxy, 100 (ln H - ln L)^2 / (4 ln 2).
/// Throws DomainError unless high >= low > 0.
double compute_parkinson_hlr(double high, double low);

/// Balanced T x n panel of strictly positive volatility proxies y and their
/// logs x. Rows are dates (strictly increasing), columns are tickers.
///
/// split_index() is the 0-based index of the first out-of-sample row; it
/// equals rows() when the whole panel is in-sample. x_bar() is the per-series
/// mean of x over the training rows [0, split_index()) only.
class VolatilityPanel {
public:
    static VolatilityPanel from_levels(std::vector<std::string> tickers, std::vector<Date> dates,
                                       Matrix y, std::size_t split_index);
    static VolatilityPanel from_logs(std::vector<std::string> tickers, std::vector<Date> dates,
                                     Matrix x, std::size_t split_index);

    const std::vector<std::string>& tickers() const noexcept { return tickers_; }
    const std::vector<Date>& dates() const noexcept { return dates_; }
    const Matrix& y() const noexcept { return y_; }
    const Matrix& x() const noexcept { return x_; }
    const Vector& x_bar() const noexcept { return x_bar_; }

    std::size_t rows() const noexcept { return static_cast<std::size_t>(x_.rows()); }
    std::size_t assets() const noexcept { return static_cast<std::size_t>(x_.cols()); }
    std::size_t split_index() const noexcept { return split_; }
    std::size_t train_rows() const noexcept { return split_; }
    bool has_holdout() const noexcept { return split_ < rows(); }

    /// Same data with a different training window (x_bar recomputed).
    VolatilityPanel with_split(std::size_t split_index) const;

    /// First row whose date is on or after `date`, rows() if none.
    std::size_t first_row_on_or_after(const Date& date) const;

    std::optional<std::size_t> ticker_index(const std::string& ticker) const;

private:
    VolatilityPanel() = default;
    void finish(std::size_t split_index);

    std::vector<std::string> tickers_;
    std::vector<Date> dates_;
    Matrix y_;
    Matrix x_;
    Vector x_bar_;
    std::size_t split_ = 0;
};

/// Assembles a balanced panel from long-format records. Dates missing for any
/// ticker are dropped (intersection join). Columns follow the order of first
/// appearance of each ticker; split_index is the first date >= split_date.
VolatilityPanel build_panel(const std::vector<OhlcRecord>& records, std::optional<Date> split_date = {});

enum class PanelFormat { automatic, long_ohlc, wide };

/// Long files carry `date,ticker,high,low` (extra columns ignored); wide files
/// carry `date,<ticker1>,...` with precomputed HLR values. Lines starting with
/// '#' are comments; a `# split_date=YYYY-MM-DD` comment sets the split unless
/// `split_date` is given.
VolatilityPanel load_panel_csv(const std::filesystem::path& path, PanelFormat format = PanelFormat::automatic,
                               std::optional<Date> split_date = {});

std::vector<OhlcRecord> load_ohlc_csv(const std::filesystem::path& path);

/// Writes the wide format with shortest round-trip number formatting.
void save_panel_csv(const VolatilityPanel& panel, const std::filesystem::path& path);

}  // namespace vmem
