#include "support/fixtures.hpp"

#include <cstdio>
#include <fstream>

namespace fixtures {

namespace fs = std::filesystem;

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    for (;;) {
        auto candidate = fs::temp_directory_path() /
                         ("reinvoke-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        if (fs::create_directories(candidate)) {
            path_ = candidate;
            return;
        }
    }
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

void write(const fs::path& path, const std::string& contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << contents;
}

std::string token(std::size_t tool, std::size_t j) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "k%03zux%zu", tool, j);
    return buf;
}

std::vector<reinvoke::Json> disjoint_records(std::size_t n, std::size_t words) {
    std::vector<reinvoke::Json> records;
    for (std::size_t i = 0; i < n; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "tool%03zu", i);
        std::string desc;
        for (std::size_t j = 0; j < words; ++j) desc += (j ? " " : "") + token(i, j);
        records.push_back(reinvoke::Json{{"name", name}, {"description", desc}});
    }
    return records;
}

reinvoke::Corpus disjoint_corpus(std::size_t n, std::size_t words) {
    return reinvoke::corpus_from_records(disjoint_records(n, words), "<disjoint>");
}

const char* const kFlightRestaurantQuery =
    "I'm going to be in San Francisco this weekend for a conference. "
    "[[book a flight from New York City to San Francisco this weekend]] "
    "Also [[find highly rated restaurants in downtown San Francisco]]";

reinvoke::Corpus travel_corpus() {
    auto api = [](const char* tool, const char* name, const char* desc) {
        return reinvoke::Json{{"tool_name", tool}, {"api_name", name}, {"api_description", desc}};
    };
    std::vector<reinvoke::Json> records{
        api("flights", "book_flight", "book airline flight seats departing from an origin city to a destination"),
        api("dining", "find_restaurant", "find highly rated restaurants and dining places with reviews"),
        api("lodging", "reserve_hotel", "reserve hotel rooms and suites for overnight stays"),
        api("meteo", "get_forecast", "get weather forecast temperature rain wind"),
        api("cars", "rent_car", "rent cars vans automobiles pickup dropoff"),
        api("money", "convert_currency", "convert currency exchange rates euros dollars"),
        api("music", "play_song", "play songs albums playlists artists"),
        api("fitness", "log_workout", "log workouts exercise gym running"),
    };
    return reinvoke::corpus_from_records(records, "<travel>");
}

reinvoke::RetryPolicy fast_retry(int retries) {
    return reinvoke::RetryPolicy{retries, std::chrono::milliseconds{1}, 2.0, std::chrono::milliseconds{4}};
}

std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double uniform_real(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::string random_text(Rng& rng, std::size_t vocab, std::size_t min_len, std::size_t max_len) {
    std::string out;
    auto len = uniform(rng, min_len, max_len);
    for (std::size_t i = 0; i < len; ++i) out += (i ? " " : "") + ("t" + std::to_string(uniform(rng, 0, vocab - 1)));
    return out;
}

}  // namespace fixtures
