#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "e2d/events.hpp"

namespace e2d {

struct EventFile {
  SensorSize sensor;
  std::vector<Event> events;
};

// EVT1 layout, little-endian:
//   "EVT1" | u16 width | u16 height | u32 reserved (0) | u64 record count
//   then per record: u64 t_us | u16 x | u16 y | i8 polarity   (13 bytes)
inline constexpr std::size_t kEvt1PreambleBytes = 20;
inline constexpr std::size_t kEvt1RecordBytes = 13;

void write_evt1(std::ostream& out, const EventFile& file);
void write_evt1(const std::filesystem::path& path, const EventFile& file);
EventFile read_evt1(std::istream& in);
EventFile read_evt1(const std::filesystem::path& path);
/// Header only.
SensorSize read_evt1_sensor(const std::filesystem::path& path);

/// Plain-text debug format, one "t x y p" line per event.
void write_event_text(std::ostream& out, const std::vector<Event>& events);
std::vector<Event> read_event_text(std::istream& in);

}  // namespace e2d
