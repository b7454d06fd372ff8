#include "triagenet/csv.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include "triagenet/errors.hpp"

namespace triagenet {

namespace {

const std::vector<std::string> kColumns = {
    "age", "sex", "race",
    "oxygen_saturation", "systolic_bp", "pulse", "respiratory_rate", "temperature",
    "gcs_eye", "gcs_verbal", "gcs_motor",
    "iss",
    "ais1", "ais2", "ais3", "ais4", "ais5", "ais6", "ais7", "ais8", "ais9",
    "comorbidities",
    "injury_intent", "injury_type", "injury_mechanism",
    "arrived_by_ambulance", "transferred_in",
    "disposition", "died_in_ed",
};

[[noreturn]] void fail(std::size_t line, const std::string& what) {
    throw ValidationError("cohort csv line " + std::to_string(line) + ": " + what);
}

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, delim)) cells.push_back(cell);
    if (!line.empty() && line.back() == delim) cells.emplace_back();
    return cells;
}

int parse_int(const std::string& cell, std::size_t line, const char* what) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        fail(line, std::string("bad integer for ") + what + ": '" + cell + "'");
    }
    return value;
}

double parse_double(const std::string& cell, std::size_t line, const char* what) {
    double value = 0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        fail(line, std::string("bad number for ") + what + ": '" + cell + "'");
    }
    return value;
}

bool parse_bool(const std::string& cell, std::size_t line, const char* what) {
    if (cell == "0") return false;
    if (cell == "1") return true;
    fail(line, std::string("bad boolean for ") + what + ": '" + cell + "' (expected 0/1)");
}

std::string comorbidities_cell(const ComorbiditySet& set) {
    if (set.none()) return "no_comorbidities";
    std::string out;
    for (int i = 0; i < kNumComorbidity; ++i) {
        const auto c = static_cast<Comorbidity>(i);
        if (!set.test(c)) continue;
        if (!out.empty()) out += ';';
        out += to_token(c);
    }
    return out;
}

ComorbiditySet parse_comorbidities(const std::string& cell, std::size_t line) {
    ComorbiditySet set;
    if (cell == "no_comorbidities") return set;
    for (const auto& token : split(cell, ';')) {
        const auto c = comorbidity_from_token(token);
        if (!c) fail(line, "unknown comorbidity token '" + token + "'");
        set.set(*c);
    }
    if (set.none()) fail(line, "empty comorbidity cell (expected 'no_comorbidities')");
    return set;
}

} // namespace

const std::vector<std::string>& cohort_csv_columns() { return kColumns; }

std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string record_to_csv_row(const PatientRecord& r) {
    auto opt_num = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string();
    };
    auto opt_int = [](const std::optional<int>& v) {
        return v ? std::to_string(*v) : std::string();
    };
    auto opt_bool = [](const std::optional<bool>& v) {
        return v ? std::string(*v ? "1" : "0") : std::string();
    };
    std::string out;
    out.reserve(256);
    out += std::to_string(r.age);
    out += ',';
    out += to_token(r.sex);
    out += ',';
    out += to_token(r.race);
    out += ',';
    out += opt_num(r.oxygen_saturation);
    out += ',';
    out += opt_num(r.systolic_bp);
    out += ',';
    out += opt_num(r.pulse);
    out += ',';
    out += opt_num(r.respiratory_rate);
    out += ',';
    out += opt_num(r.temperature);
    out += ',';
    out += opt_int(r.gcs_eye);
    out += ',';
    out += opt_int(r.gcs_verbal);
    out += ',';
    out += opt_int(r.gcs_motor);
    out += ',';
    out += std::to_string(r.iss);
    for (const int a : r.ais) {
        out += ',';
        out += std::to_string(a);
    }
    out += ',';
    out += comorbidities_cell(r.comorbidities);
    out += ',';
    out += to_token(r.injury_intent);
    out += ',';
    out += to_token(r.injury_type);
    out += ',';
    out += to_token(r.injury_mechanism);
    out += ',';
    out += opt_bool(r.arrived_by_ambulance);
    out += ',';
    out += opt_bool(r.transferred_in);
    out += ',';
    out += to_token(r.disposition);
    out += ',';
    out += r.died_in_ed ? '1' : '0';
    return out;
}

void write_cohort_csv(std::ostream& out, std::span<const PatientRecord> records,
                      std::span<const std::string> comment_lines) {
    for (const auto& c : comment_lines) out << "# " << c << '\n';
    for (std::size_t i = 0; i < kColumns.size(); ++i) {
        if (i) out << ',';
        out << kColumns[i];
    }
    out << '\n';
    for (const auto& r : records) out << record_to_csv_row(r) << '\n';
}

void write_cohort_csv(const std::filesystem::path& path, std::span<const PatientRecord> records,
                      std::span<const std::string> comment_lines) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open for writing: " + path.string());
    write_cohort_csv(out, records, comment_lines);
    if (!out) throw ValidationError("write failed: " + path.string());
}

std::vector<PatientRecord> read_cohort_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    // Skip provenance comments, then require the exact header.
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line[0] == '#') continue;
        break;
    }
    if (line.empty() && line_no == 0) throw ValidationError("cohort csv: empty input");
    {
        const auto cells = split(line, ',');
        if (cells.size() != kColumns.size()) {
            fail(line_no, "header has " + std::to_string(cells.size()) + " columns, expected " +
                              std::to_string(kColumns.size()));
        }
        for (std::size_t i = 0; i < kColumns.size(); ++i) {
            if (cells[i] != kColumns[i]) {
                fail(line_no, "header column " + std::to_string(i + 1) + " is '" + cells[i] +
                                  "', expected '" + kColumns[i] + "'");
            }
        }
    }

    std::vector<PatientRecord> records;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != kColumns.size()) {
            fail(line_no, "row has " + std::to_string(cells.size()) + " cells, expected " +
                              std::to_string(kColumns.size()));
        }
        PatientRecord r;
        std::size_t i = 0;
        auto next = [&]() -> const std::string& { return cells[i++]; };

        r.age = parse_int(next(), line_no, "age");
        {
            const auto& cell = next();
            const auto v = sex_from_token(cell);
            if (!v) fail(line_no, "unknown sex token '" + cell + "'");
            r.sex = *v;
        }
        {
            const auto& cell = next();
            const auto v = race_from_token(cell);
            if (!v) fail(line_no, "unknown race token '" + cell + "'");
            r.race = *v;
        }
        auto opt_num = [&](const char* what) -> std::optional<double> {
            const auto& cell = next();
            if (cell.empty()) return std::nullopt;
            return parse_double(cell, line_no, what);
        };
        auto opt_int = [&](const char* what) -> std::optional<int> {
            const auto& cell = next();
            if (cell.empty()) return std::nullopt;
            return parse_int(cell, line_no, what);
        };
        r.oxygen_saturation = opt_num("oxygen_saturation");
        r.systolic_bp = opt_num("systolic_bp");
        r.pulse = opt_num("pulse");
        r.respiratory_rate = opt_num("respiratory_rate");
        r.temperature = opt_num("temperature");
        r.gcs_eye = opt_int("gcs_eye");
        r.gcs_verbal = opt_int("gcs_verbal");
        r.gcs_motor = opt_int("gcs_motor");
        r.iss = parse_int(next(), line_no, "iss");
        for (int k = 0; k < 9; ++k) r.ais[k] = parse_int(next(), line_no, "ais");
        r.comorbidities = parse_comorbidities(next(), line_no);
        {
            const auto& cell = next();
            const auto v = intent_from_token(cell);
            if (!v) fail(line_no, "unknown injury_intent token '" + cell + "'");
            r.injury_intent = *v;
        }
        {
            const auto& cell = next();
            const auto v = type_from_token(cell);
            if (!v) fail(line_no, "unknown injury_type token '" + cell + "'");
            r.injury_type = *v;
        }
        {
            const auto& cell = next();
            const auto v = mechanism_from_token(cell);
            if (!v) fail(line_no, "unknown injury_mechanism token '" + cell + "'");
            r.injury_mechanism = *v;
        }
        auto opt_bool = [&](const char* what) -> std::optional<bool> {
            const auto& cell = next();
            if (cell.empty()) return std::nullopt;
            return parse_bool(cell, line_no, what);
        };
        r.arrived_by_ambulance = opt_bool("arrived_by_ambulance");
        r.transferred_in = opt_bool("transferred_in");
        {
            const auto& cell = next();
            const auto v = disposition_from_token(cell);
            if (!v) fail(line_no, "unknown disposition token '" + cell + "'");
            r.disposition = *v;
        }
        r.died_in_ed = parse_bool(next(), line_no, "died_in_ed");

        try {
            validate_record(r);
        } catch (const ValidationError& e) {
            fail(line_no, e.what());
        }
        records.push_back(r);
    }
    return records;
}

std::vector<PatientRecord> read_cohort_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open for reading: " + path.string());
    return read_cohort_csv(in);
}

} // namespace triagenet
