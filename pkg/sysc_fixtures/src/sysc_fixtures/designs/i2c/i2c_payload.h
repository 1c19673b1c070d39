#ifndef I2C_PAYLOAD_H
#define I2C_PAYLOAD_H

#include <systemc>

enum i2c_target_t { TARGET_ALU = 0, TARGET_REG = 1 };
enum i2c_phase_t { PHASE_IDLE = 0, PHASE_ADDRESSING = 1, PHASE_ACK = 2, PHASE_TRANSFER = 3 };

struct i2c_request {
    bool start;
    bool write;
    bool ack;
    sc_dt::sc_uint<8> wdata;
    sc_dt::sc_uint<8> rdata;
    i2c_target_t target;
    i2c_phase_t phase;
};

// Bookkeeping kept by the bus model; never carried over the socket.
struct bus_stats {
    sc_dt::sc_uint<8> total;
    sc_dt::sc_uint<8> nacks;
};

#endif  /* I2C_PAYLOAD_H */
