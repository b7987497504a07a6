#include "afex/oracle.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <numbers>
#include <sstream>

#include "afex/csv.hpp"

namespace afex {

Tensor Oracle::eval(const Tensor& x) const {
    Tensor batch = x;
    if (batch.rank() == 1 && batch.numel() == d_) {
        batch = Tensor({1, d_}, std::vector<double>(x.ptr(), x.ptr() + d_));
    }
    if (batch.rank() != 2 || batch.cols() != d_) {
        throw OracleError("oracle: expected " + std::to_string(d_) +
                          " columns, got shape " + x.shape_string());
    }
    if (!batch.all_finite()) throw OracleError("oracle: non-finite input");

    Tensor y = eval_rows(batch);
    if (y.numel() != batch.rows()) {
        throw OracleError("oracle: produced " + std::to_string(y.numel()) +
                          " values for " + std::to_string(batch.rows()) + " rows");
    }
    if (!y.all_finite()) throw OracleError("oracle: non-finite prediction");
    return y;
}

const char* analytic_name(AnalyticFn fn) {
    switch (fn) {
        case AnalyticFn::Conditional: return "conditional";
        case AnalyticFn::Chessboard: return "chessboard";
        case AnalyticFn::Product: return "product";
        case AnalyticFn::Wedge: return "wedge";
        case AnalyticFn::QuadLinear: return "quad-linear";
    }
    return "?";
}

AnalyticFn analytic_by_name(const std::string& name) {
    if (name == "conditional") return AnalyticFn::Conditional;
    if (name == "chessboard") return AnalyticFn::Chessboard;
    if (name == "product") return AnalyticFn::Product;
    if (name == "wedge") return AnalyticFn::Wedge;
    if (name == "quad-linear") return AnalyticFn::QuadLinear;
    throw OracleError("unknown analytic oracle: " + name);
}

std::size_t analytic_default_dim(AnalyticFn fn) {
    switch (fn) {
        case AnalyticFn::Conditional:
        case AnalyticFn::QuadLinear:
            return 2;
        case AnalyticFn::Chessboard:
        case AnalyticFn::Product:
        case AnalyticFn::Wedge:
            return 5;
    }
    return 2;
}

double analytic_value(AnalyticFn fn, const double* row) {
    const double x0 = row[0], x1 = row[1];
    switch (fn) {
        case AnalyticFn::Conditional:
            // Boundary goes with the square branch: x1 >= 0 includes zero.
            return x1 >= 0.0 ? x0 * x0 : x0;
        case AnalyticFn::Chessboard: {
            const double half_pi = std::numbers::pi / 2.0;
            const bool a = std::sin(x0 * half_pi) > 0.0;
            const bool b = std::sin(x1 * half_pi) > 0.0;
            return a != b ? 1.0 : 0.0;
        }
        case AnalyticFn::Product:
            return x0 * x1;
        case AnalyticFn::Wedge:
            return 2.0 * std::abs(x0) > std::abs(x1) ? 1.0 : 0.0;
        case AnalyticFn::QuadLinear:
            return x0 * x0 + 0.5 * x1;
    }
    return 0.0;
}

AnalyticOracle::AnalyticOracle(AnalyticFn fn, std::size_t d) : Oracle(d), fn_(fn) {
    if (d < 2) {
        throw OracleError(std::string("analytic oracle '") + analytic_name(fn) +
                          "' needs at least 2 dimensions");
    }
}

Tensor AnalyticOracle::eval_rows(const Tensor& x) const {
    const std::size_t n = x.rows(), d = x.cols();
    Tensor y({n});
    const double* xp = x.ptr();
    double* yp = y.ptr();
    const AnalyticFn fn = fn_;
#pragma omp parallel for schedule(static) if (n >= 4096)
    for (std::size_t i = 0; i < n; ++i) yp[i] = analytic_value(fn, xp + i * d);
    return y;
}

FileOracle::FileOracle(const std::string& path) : Oracle(0) {
    const csv::Table table = csv::read_numeric_file(path);
    if (table.rows.empty()) throw OracleError("file oracle: no data rows in " + path);
    if (table.cols() < 2) {
        throw OracleError("file oracle: need x columns plus a y column in " + path);
    }
    d_ = table.cols() - 1;
    rows_.reserve(table.rows.size());
    y_.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        rows_.emplace_back(row.begin(), row.end() - 1);
        y_.push_back(row.back());
    }
}

Tensor FileOracle::eval_with_distance(const Tensor& x,
                                      std::vector<double>* distance) const {
    const std::size_t n = x.rows(), d = d_;
    Tensor y({n});
    if (distance) distance->assign(n, 0.0);
    const double* xp = x.ptr();
#pragma omp parallel for schedule(static) if (n * rows_.size() >= 16384)
    for (std::size_t i = 0; i < n; ++i) {
        const double* q = xp + i * d;
        std::size_t best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            double d2 = 0.0;
            const double* row = rows_[r].data();
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = q[j] - row[j];
                d2 += diff * diff;
            }
            if (d2 < best_d2) {
                best_d2 = d2;
                best = r;
            }
        }
        y[i] = y_[best];
        if (distance) (*distance)[i] = std::sqrt(best_d2);
    }
    return y;
}

Tensor FileOracle::eval_rows(const Tensor& x) const {
    return eval_with_distance(x, nullptr);
}

CommandOracle::CommandOracle(std::vector<std::string> argv, std::size_t d)
    : Oracle(d), argv_(std::move(argv)) {
    if (argv_.empty()) throw OracleError("command oracle: empty argv");
    if (d == 0) throw OracleError("command oracle: dimension must be positive");
}

namespace {

void write_all(int fd, const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw OracleError("command oracle: write failed: " +
                              std::string(std::strerror(errno)));
        }
        off += static_cast<std::size_t>(n);
    }
}

}  // namespace

Tensor CommandOracle::eval_rows(const Tensor& x) const {
    std::lock_guard<std::mutex> lock(run_mutex_);
    const std::size_t n = x.rows(), d = x.cols();

    std::string input;
    for (std::size_t i = 0; i < n; ++i) {
        input += csv::format_row({x.ptr() + i * d, d});
        input += '\n';
    }

    // Stage the input in an unlinked temp file so the child can consume it
    // at its own pace; a stdin pipe could deadlock once both pipes fill.
    char tmpl[] = "/tmp/afex-oracle-XXXXXX";
    const int in_fd = ::mkstemp(tmpl);
    if (in_fd < 0) throw OracleError("command oracle: mkstemp failed");
    ::unlink(tmpl);
    try {
        write_all(in_fd, input);
    } catch (...) {
        ::close(in_fd);
        throw;
    }
    ::lseek(in_fd, 0, SEEK_SET);

    int out_pipe[2];
    if (::pipe(out_pipe) != 0) {
        ::close(in_fd);
        throw OracleError("command oracle: pipe failed");
    }

    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(in_fd);
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        throw OracleError("command oracle: fork failed");
    }
    if (pid == 0) {
        ::dup2(in_fd, STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::close(in_fd);
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        std::vector<char*> args;
        args.reserve(argv_.size() + 1);
        for (const std::string& a : argv_) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        ::execvp(args[0], args.data());
        ::_exit(127);
    }

    ::close(in_fd);
    ::close(out_pipe[1]);
    std::string output;
    char buf[4096];
    while (true) {
        const ssize_t got = ::read(out_pipe[0], buf, sizeof(buf));
        if (got < 0) {
            if (errno == EINTR) continue;
            ::close(out_pipe[0]);
            throw OracleError("command oracle: read failed");
        }
        if (got == 0) break;
        output.append(buf, static_cast<std::size_t>(got));
    }
    ::close(out_pipe[0]);

    int status = 0;
    if (::waitpid(pid, &status, 0) < 0) {
        throw OracleError("command oracle: waitpid failed");
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        throw OracleError("command oracle: '" + argv_[0] + "' exited with status " +
                          std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
    }

    Tensor y({n});
    std::istringstream lines(output);
    std::string line;
    std::size_t count = 0;
    while (std::getline(lines, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        if (count >= n) {
            throw OracleError("command oracle: more output lines than input rows");
        }
        double v = 0.0;
        const char* first = line.data() + start;
        const char* last = line.data() + line.size();
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last) {
            throw OracleError("command oracle: malformed output line '" + line + "'");
        }
        y[count++] = v;
    }
    if (count != n) {
        throw OracleError("command oracle: got " + std::to_string(count) +
                          " values for " + std::to_string(n) + " rows");
    }
    return y;
}

std::unique_ptr<Oracle> make_analytic_oracle(const std::string& name, std::size_t d) {
    const AnalyticFn fn = analytic_by_name(name);
    if (d == 0) d = analytic_default_dim(fn);
    return std::make_unique<AnalyticOracle>(fn, d);
}

std::unique_ptr<Oracle> make_file_oracle(const std::string& path) {
    return std::make_unique<FileOracle>(path);
}

std::unique_ptr<Oracle> make_command_oracle(std::vector<std::string> argv, std::size_t d) {
    return std::make_unique<CommandOracle>(std::move(argv), d);
}

}  // namespace afex
