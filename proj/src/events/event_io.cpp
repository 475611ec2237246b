#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "e2d/detail/binary.hpp"
#include "e2d/error.hpp"
#include "e2d/event_io.hpp"

namespace e2d {

using detail::get_le;
using detail::put_le;

void write_evt1(std::ostream& out, const EventFile& file) {
  for (std::size_t i = 0; i < file.events.size(); ++i) {
    const Event& e = file.events[i];
    if (e.x >= file.sensor.width || e.y >= file.sensor.height) {
      throw BoundsError("event " + std::to_string(i) + " lies outside the sensor");
    }
    if (e.polarity != 1 && e.polarity != -1) {
      throw DomainError("event " + std::to_string(i) + " has polarity " +
                        std::to_string(e.polarity));
    }
  }
  out.write("EVT1", 4);
  put_le<std::uint16_t>(out, file.sensor.width);
  put_le<std::uint16_t>(out, file.sensor.height);
  put_le<std::uint32_t>(out, 0);
  put_le<std::uint64_t>(out, file.events.size());
  for (const Event& e : file.events) {
    put_le<std::uint64_t>(out, e.t);
    put_le<std::uint16_t>(out, e.x);
    put_le<std::uint16_t>(out, e.y);
    put_le<std::int8_t>(out, e.polarity);
  }
  if (!out) throw IoError("failed writing EVT1 stream");
}

void write_evt1(const std::filesystem::path& path, const EventFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_evt1(out, file);
}

EventFile read_evt1(std::istream& in) {
  detail::expect_magic(in, "EVT1", "EVT1 stream");
  EventFile file;
  file.sensor.width = get_le<std::uint16_t>(in, "EVT1 width");
  file.sensor.height = get_le<std::uint16_t>(in, "EVT1 height");
  (void)get_le<std::uint32_t>(in, "EVT1 reserved");
  const auto count = get_le<std::uint64_t>(in, "EVT1 record count");
  if (count > std::numeric_limits<std::size_t>::max() / kEvt1RecordBytes) {
    throw IoError("EVT1 record count " + std::to_string(count) + " is implausible");
  }
  file.events.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 24)));
  for (std::uint64_t i = 0; i < count; ++i) {
    Event e;
    e.t = get_le<std::uint64_t>(in, "EVT1 record");
    e.x = get_le<std::uint16_t>(in, "EVT1 record");
    e.y = get_le<std::uint16_t>(in, "EVT1 record");
    e.polarity = get_le<std::int8_t>(in, "EVT1 record");
    if (e.polarity != 1 && e.polarity != -1) {
      throw IoError("EVT1 record " + std::to_string(i) + " has polarity " +
                    std::to_string(e.polarity));
    }
    if (e.x >= file.sensor.width || e.y >= file.sensor.height) {
      throw IoError("EVT1 record " + std::to_string(i) + " lies outside the sensor");
    }
    file.events.push_back(e);
  }
  return file;
}

EventFile read_evt1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open event file " + path.string());
  try {
    return read_evt1(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

SensorSize read_evt1_sensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open event file " + path.string());
  try {
    detail::expect_magic(in, "EVT1", "EVT1 stream");
    SensorSize s;
    s.width = get_le<std::uint16_t>(in, "EVT1 width");
    s.height = get_le<std::uint16_t>(in, "EVT1 height");
    return s;
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_event_text(std::ostream& out, const std::vector<Event>& events) {
  for (const Event& e : events) {
    out << e.t << ' ' << e.x << ' ' << e.y << ' ' << static_cast<int>(e.polarity) << '\n';
  }
}

std::vector<Event> read_event_text(std::istream& in) {
  std::vector<Event> events;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::uint64_t t = 0;
    unsigned x = 0, y = 0;
    int p = 0;
    if (!(fields >> t >> x >> y >> p) || (p != 1 && p != -1) ||
        x > std::numeric_limits<std::uint16_t>::max() ||
        y > std::numeric_limits<std::uint16_t>::max()) {
      throw IoError("malformed event on line " + std::to_string(lineno));
    }
    events.push_back(Event{static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), t,
                           static_cast<std::int8_t>(p)});
  }
  return events;
}

}  // namespace e2d
